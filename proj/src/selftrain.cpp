#include "stpinn/selftrain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>

#include "io_util.hpp"

namespace stpinn {

CandidatePool::CandidatePool(std::vector<double> points) : coords(std::move(points)) {
    if (coords.size() % 2 != 0) throw std::invalid_argument("candidate pool coords must be (t, x) pairs");
    flags.assign(coords.size() / 2, 0);
}

void validate(const SelfTrainConfig& config) {
    if (config.period < 1) throw std::invalid_argument("self-training period p must be >= 1");
    if (!(config.max_fraction > 0.0 && config.max_fraction <= 1.0)) {
        throw std::invalid_argument("self-training fraction q must be in (0, 1]");
    }
    if (config.stable_events < 0) throw std::invalid_argument("self-training r must be >= 0");
    if (config.warmup < 0) throw std::invalid_argument("self-training warmup must be >= 0");
}

std::vector<double> score_candidates(std::span<const double> params, const MlpSpec& spec,
                                     const PdeProblem& problem, const CandidatePool& pool) {
    if (pool.size() == 0) throw std::invalid_argument("score_candidates: empty candidate pool");
    const ResidualEvaluator residual(problem);
    const std::vector<Jet2> jets = evaluate_jets(params, spec, pool.coords);
    std::vector<double> scores(jets.size());
    for (std::size_t i = 0; i < jets.size(); ++i) {
        const double f = residual(jets[i]);
        scores[i] = f * f;
    }
    return scores;
}

std::vector<std::uint32_t> select_top_q(std::span<const double> scores, double q) {
    if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("select_top_q: q must be in (0, 1]");
    if (scores.empty()) throw std::invalid_argument("select_top_q: no scores");
    const auto n = scores.size();
    // The relative nudge keeps products such as 100 * 0.29 from rounding
    // just below the integer they denote.
    const auto k = std::min(
        n, static_cast<std::size_t>(std::floor(static_cast<double>(n) * q * (1.0 + 1e-12))));
    if (k == 0) return {};

    // NaN residuals rank last.
    auto key = [&](std::uint32_t i) {
        const double s = scores[i];
        return std::isnan(s) ? std::numeric_limits<double>::infinity() : s;
    };
    auto before = [&](std::uint32_t a, std::uint32_t b) {
        const double ka = key(a);
        const double kb = key(b);
        return ka < kb || (ka == kb && a < b);
    };
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    if (k < n) std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), before);
    order.resize(k);
    std::sort(order.begin(), order.end());
    return order;
}

void update_flags(CandidatePool& pool, std::span<const std::uint32_t> selected) {
    std::vector<char> chosen(pool.size(), 0);
    for (auto i : selected) {
        if (i >= pool.size()) throw std::out_of_range("update_flags: index outside the pool");
        chosen[i] = 1;
    }
    for (std::size_t i = 0; i < pool.size(); ++i) pool.flags[i] = chosen[i] ? pool.flags[i] + 1 : 0;
}

PseudoSet harvest_pseudo(std::span<const double> params, const MlpSpec& spec,
                         const CandidatePool& pool, int stable_events) {
    PseudoSet pseudo;
    std::vector<double> points;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (pool.flags[i] > static_cast<std::uint32_t>(stable_events)) {
            pseudo.indices.push_back(static_cast<std::uint32_t>(i));
            points.push_back(pool.t(i));
            points.push_back(pool.x(i));
        }
    }
    if (!points.empty()) pseudo.labels = forward_batch(params, spec, points);
    return pseudo;
}

bool is_generation_event(std::int64_t iter, const SelfTrainConfig& config) {
    return iter >= config.warmup && (iter - config.warmup) % config.period == 0;
}

PseudoSet run_generation_event(std::span<const double> params, const MlpSpec& spec,
                               const PdeProblem& problem, CandidatePool& pool,
                               const SelfTrainConfig& config) {
    const auto scores = score_candidates(params, spec, problem, pool);
    const auto selected = select_top_q(scores, config.max_fraction);
    update_flags(pool, selected);
    return harvest_pseudo(params, spec, pool, config.stable_events);
}

PseudoDumpWriter::PseudoDumpWriter(const std::filesystem::path& path) : out_(path) {
    if (!out_) throw std::runtime_error("cannot open pseudo dump " + path.string());
    out_ << "event_iter,index,t,x,label,flag\n";
}

void PseudoDumpWriter::write(std::int64_t event_iter, const CandidatePool& pool,
                             const PseudoSet& pseudo) {
    for (std::size_t k = 0; k < pseudo.size(); ++k) {
        const auto i = pseudo.indices[k];
        out_ << event_iter << ',' << i << ',' << io::format_double(pool.t(i)) << ','
             << io::format_double(pool.x(i)) << ',' << io::format_double(pseudo.labels[k]) << ','
             << pool.flags[i] << '\n';
    }
    out_.flush();
    if (!out_) throw std::runtime_error("failed writing pseudo dump");
}

std::vector<PseudoDumpRow> read_pseudo_dump(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open pseudo dump " + path.string());
    std::string line;
    if (!std::getline(in, line) || io::trim(line) != "event_iter,index,t,x,label,flag") {
        throw std::runtime_error("pseudo dump " + path.string() + " has an unexpected header");
    }
    std::vector<PseudoDumpRow> rows;
    while (std::getline(in, line)) {
        if (io::trim(line).empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(io::trim(cell));
        if (cells.size() != 6) throw std::runtime_error("malformed pseudo dump row: " + line);
        PseudoDumpRow r;
        r.event_iter = io::parse_int(cells[0], "event_iter");
        r.index = static_cast<std::uint32_t>(io::parse_int(cells[1], "index"));
        r.t = io::parse_double(cells[2], "t");
        r.x = io::parse_double(cells[3], "x");
        r.label = io::parse_double(cells[4], "label");
        r.flag = static_cast<std::uint32_t>(io::parse_int(cells[5], "flag"));
        rows.push_back(r);
    }
    return rows;
}

}  // namespace stpinn
