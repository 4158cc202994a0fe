#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <Eigen/Dense>

#include "record.hpp"

namespace dp2bm {

inline Rational m_exponent(ThetaClass c) {
    switch (c) {
        case ThetaClass::MinusSquare: return Rational(1, 2);
        case ThetaClass::NonSquare: return Rational(3, 8);
        default: throw ClassUnsupported();
    }
}

// the odd-prime-exact-once tag, read off factored_theta
inline std::optional<std::string> prefilter(const CoefficientTriple& a) {
    if (auto p = brauer::prefilter_prime(a)) return "odd-prime-exact-once at " + std::to_string(*p);
    return std::nullopt;
}

enum class Bucket { NotEls, ObstructedMinusSquare, ObstructedNonSquare, UndecidedPlusSquare, UndecidedOther, NoObstruction };

inline Bucket bucket_of(const ObstructionDecision& d) {
    switch (d.status) {
        case Status::NotEverywhereLocallySoluble: return Bucket::NotEls;
        case Status::NoObstructionFromA: return Bucket::NoObstruction;
        case Status::ObstructionFromA:
            if (d.a.theta_class == ThetaClass::PlusSquare) throw std::logic_error("obstruction with theta a square");
            return d.a.theta_class == ThetaClass::MinusSquare ? Bucket::ObstructedMinusSquare
                                                              : Bucket::ObstructedNonSquare;
        default:
            return d.a.theta_class == ThetaClass::PlusSquare ? Bucket::UndecidedPlusSquare : Bucket::UndecidedOther;
    }
}

struct CountReport {
    i64 T = 0;
    u64 n_total = 0, n_els = 0;
    u64 n_obstructed_minus_square = 0, n_obstructed_nonsquare = 0;
    u64 n_undecided_plus_square = 0, n_undecided_other = 0;
    u64 n_no_obstruction = 0;
    u64 n_limit_failures = 0;  // part of the undecided buckets
    double wall_time = 0;
    bool tainted = false;
};

struct ExponentFit {
    std::vector<std::pair<double, double>> grid;  // (T, count)
    double c = 0, p = 0, q = 0;                   // log N = c + p log T + q log log T
    std::vector<double> residuals;
};

// least squares in (1, log T, log log T)
inline ExponentFit fit_exponents(const std::vector<std::pair<double, double>>& grid) {
    if (grid.size() < 4) throw DegenerateGrid("need at least 4 grid points");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid[i].first <= 1 || grid[i].second <= 0) throw DegenerateGrid("need T > 1 and positive counts");
        if (i && grid[i].first <= grid[i - 1].first) throw DegenerateGrid("grid must be strictly increasing");
    }
    const auto n = Eigen::Index(grid.size());
    Eigen::MatrixXd X(n, 3);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double L = std::log(grid[std::size_t(i)].first);
        X(i, 0) = 1;
        X(i, 1) = L;
        X(i, 2) = std::log(L);
        y(i) = std::log(grid[std::size_t(i)].second);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (qr.rank() < 3) throw DegenerateGrid("design matrix is rank deficient");
    Eigen::VectorXd b = qr.solve(y);
    ExponentFit f;
    f.grid = grid;
    f.c = b(0);
    f.p = b(1);
    f.q = b(2);
    Eigen::VectorXd r = y - X * b;
    f.residuals.assign(r.data(), r.data() + r.size());
    return f;
}

struct CountConfig {
    unsigned threads = 1;
    i64 slab = 1;            // a0 values per work unit
    std::string checkpoint;  // resume file; empty disables
    std::string jsonl;       // decision records of streamed statuses; empty disables
    std::vector<Status> stream = {Status::ObstructionFromA};
    DecisionOptions decision;
    double taint_fraction = 0.001;
    u64 abort_after = 100000;  // cap failures tolerated before giving up
    std::size_t stop_after = 0;  // finish this many slabs and return (0: run to the end)
};

struct CountResult {
    std::vector<CountReport> rows;
    bool complete = false;
    std::vector<std::array<i64, 3>> limit_failures;  // first 100
};

namespace counting::detail {

constexpr int kCounters = 7;  // six buckets and the cap failures
using Tally = std::vector<std::array<u64, kCounters>>;  // by height

struct SlabResult {
    Tally tally;
    std::string lines;
    std::vector<std::array<i64, 3>> failures;
};

inline std::string config_hash(i64 tmax, const CountConfig& cfg) {
    std::ostringstream s;
    const auto& o = cfg.decision;
    s << "v1 " << tmax << ' ' << cfg.slab << ' ' << o.force_past_prefilter << o.exceptional_guard << ' '
      << o.height_cap << ' ' << o.precision_cap << ' ' << o.cell_budget << ' ' << o.guard_point_height;
    for (auto st : cfg.stream) s << ' ' << int(st);
    // FNV-1a
    u64 h = 1469598103934665603ULL;
    for (unsigned char ch : s.str()) h = (h ^ ch) * 1099511628211ULL;
    std::ostringstream hex;
    hex << std::hex << h;
    return hex.str();
}

struct Checkpoint {
    std::string hash;
    std::size_t slabs_done = 0;
    u64 jsonl_bytes = 0;
    Tally tally;
    std::vector<std::array<i64, 3>> failures;

    void save(const std::string& path) const {
        std::ofstream out(path + ".tmp");
        out << "dp2bm-checkpoint 1\nconfig " << hash << "\nslabs_done " << slabs_done << "\njsonl_bytes "
            << jsonl_bytes << '\n';
        for (std::size_t h = 0; h < tally.size(); ++h) {
            bool any = false;
            for (u64 x : tally[h]) any = any || x;
            if (!any) continue;
            out << "h " << h;
            for (u64 x : tally[h]) out << ' ' << x;
            out << '\n';
        }
        for (auto& t : failures) out << "failed " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
        out.close();
        std::filesystem::rename(path + ".tmp", path);
    }

    static std::optional<Checkpoint> load(const std::string& path, std::size_t heights) {
        std::ifstream in(path);
        if (!in) return std::nullopt;
        Checkpoint c;
        c.tally.assign(heights, {});
        std::string key;
        in >> key;
        if (key != "dp2bm-checkpoint") throw CheckpointMismatch("not a checkpoint file: " + path);
        in >> key;  // format version
        while (in >> key) {
            if (key == "config") {
                in >> c.hash;
            } else if (key == "slabs_done") {
                in >> c.slabs_done;
            } else if (key == "jsonl_bytes") {
                in >> c.jsonl_bytes;
            } else if (key == "h") {
                std::size_t h;
                in >> h;
                if (h >= heights) throw CheckpointMismatch("height out of range in " + path);
                for (auto& x : c.tally[h]) in >> x;
            } else if (key == "failed") {
                std::array<i64, 3> t;
                in >> t[0] >> t[1] >> t[2];
                c.failures.push_back(t);
            } else {
                throw CheckpointMismatch("unexpected key '" + key + "' in " + path);
            }
        }
        return c;
    }
};

}  // namespace counting::detail

// All triples with 0 < |a_i| <= tmax, in a0-slabs; one report per T in grid (cumulative by max |a_i|).
inline CountResult count_obstructed(i64 tmax, std::vector<i64> grid, const CountConfig& cfg = {}) {
    using namespace counting::detail;
    if (tmax < 1) throw std::invalid_argument("tmax must be at least 1");
    if (grid.empty()) grid = {tmax};
    for (i64 T : grid)
        if (T < 1 || T > tmax) throw std::invalid_argument("grid values must lie in [1, tmax]");
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<i64> a0s;
    for (i64 a = -tmax; a <= tmax; ++a)
        if (a) a0s.push_back(a);
    const i64 slab = std::max<i64>(1, cfg.slab);
    const std::size_t n_slabs = (a0s.size() + std::size_t(slab) - 1) / std::size_t(slab);

    Checkpoint state;
    state.hash = config_hash(tmax, cfg);
    state.tally.assign(std::size_t(tmax) + 1, {});
    if (!cfg.checkpoint.empty()) {
        if (auto c = Checkpoint::load(cfg.checkpoint, std::size_t(tmax) + 1)) {
            if (c->hash != state.hash) throw CheckpointMismatch("checkpoint was written with a different configuration");
            state = *c;
        }
    }
    std::ofstream jsonl;
    if (!cfg.jsonl.empty()) {
        if (!std::filesystem::exists(cfg.jsonl)) std::ofstream(cfg.jsonl).close();
        std::filesystem::resize_file(cfg.jsonl, state.jsonl_bytes);
        jsonl.open(cfg.jsonl, std::ios::binary | std::ios::app);
    }
    auto streamed = [&](Status s) { return std::find(cfg.stream.begin(), cfg.stream.end(), s) != cfg.stream.end(); };

    auto run_slab = [&](std::size_t idx) {
        SlabResult r;
        r.tally.assign(std::size_t(tmax) + 1, {});
        const std::size_t lo = idx * std::size_t(slab), hi = std::min(a0s.size(), lo + std::size_t(slab));
        for (std::size_t i = lo; i < hi; ++i) {
            const i64 a0 = a0s[i];
            for (i64 a1 = -tmax; a1 <= tmax; ++a1) {
                if (!a1) continue;
                for (i64 a2 = -tmax; a2 <= tmax; ++a2) {
                    if (!a2) continue;
                    auto d = brauer::has_bm_obstruction(CoefficientTriple::make(a0, a1, a2), cfg.decision);
                    auto h = std::size_t(std::max({std::abs(a0), std::abs(a1), std::abs(a2)}));
                    ++r.tally[h][int(bucket_of(d))];
                    if (d.limit_hit) {
                        ++r.tally[h][6];
                        r.failures.push_back({a0, a1, a2});
                    }
                    if (!cfg.jsonl.empty() && streamed(d.status)) r.lines += to_json(d).dump() + '\n';
                }
            }
        }
        return r;
    };

    std::mutex mu;
    std::map<std::size_t, SlabResult> done;
    std::atomic<std::size_t> next{state.slabs_done};
    const std::size_t stop = cfg.stop_after ? std::min(n_slabs, state.slabs_done + cfg.stop_after) : n_slabs;
    std::exception_ptr error;
    u64 failures = 0;
    for (auto& row : state.tally) failures += row[6];

    // merge finished slabs in index order; the checkpoint always describes a prefix
    auto merge = [&] {
        bool moved = false;
        for (auto it = done.find(state.slabs_done); it != done.end(); it = done.find(state.slabs_done)) {
            auto& r = it->second;
            for (std::size_t h = 0; h < r.tally.size(); ++h)
                for (int k = 0; k < kCounters; ++k) state.tally[h][k] += r.tally[h][k];
            for (auto& t : r.failures)
                if (state.failures.size() < 100) state.failures.push_back(t);
            if (jsonl.is_open()) {
                jsonl << r.lines;
                state.jsonl_bytes += r.lines.size();
            }
            done.erase(it);
            ++state.slabs_done;
            moved = true;
        }
        if (moved && !cfg.checkpoint.empty()) {
            if (jsonl.is_open()) jsonl.flush();
            state.save(cfg.checkpoint);
        }
    };

    auto worker = [&] {
        for (;;) {
            std::size_t idx = next.fetch_add(1);
            if (idx >= stop) return;
            {
                std::lock_guard lock(mu);
                if (error) return;
            }
            try {
                SlabResult r = run_slab(idx);
                std::lock_guard lock(mu);
                for (auto& row : r.tally) failures += row[6];
                done.emplace(idx, std::move(r));
                merge();
                if (cfg.abort_after && failures > cfg.abort_after && !error)
                    error = std::make_exception_ptr(CountAborted(state.failures));
            } catch (...) {
                std::lock_guard lock(mu);
                if (!error) error = std::current_exception();
            }
        }
    };
    const unsigned nt = std::max(1u, cfg.threads);
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < nt; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
    if (jsonl.is_open()) jsonl.flush();

    CountResult out;
    out.complete = state.slabs_done == n_slabs;
    out.limit_failures = state.failures;
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    for (i64 T : grid) {
        CountReport r;
        r.T = T;
        for (i64 h = 1; h <= T; ++h) {
            const auto& c = state.tally[std::size_t(h)];
            for (int k = 0; k < 6; ++k) r.n_total += c[k];
            r.n_obstructed_minus_square += c[int(Bucket::ObstructedMinusSquare)];
            r.n_obstructed_nonsquare += c[int(Bucket::ObstructedNonSquare)];
            r.n_undecided_plus_square += c[int(Bucket::UndecidedPlusSquare)];
            r.n_undecided_other += c[int(Bucket::UndecidedOther)];
            r.n_no_obstruction += c[int(Bucket::NoObstruction)];
            r.n_limit_failures += c[6];
        }
        r.n_els = r.n_obstructed_minus_square + r.n_obstructed_nonsquare + r.n_undecided_plus_square +
                  r.n_undecided_other + r.n_no_obstruction;
        r.wall_time = secs;
        r.tainted = r.n_els && double(r.n_limit_failures) > cfg.taint_fraction * double(r.n_els);
        out.rows.push_back(r);
    }
    return out;
}

inline const char* kCountCsvHeader =
    "T,n_total,n_els,n_obs_minus_square,n_obs_nonsquare,n_undecided_plus_square,n_undecided_other,n_no_"
    "obstruction,seconds";

// seconds stays empty unless timing is asked for, so reruns are byte-identical
inline std::string csv_row(const CountReport& r, bool timing) {
    std::ostringstream s;
    s << r.T << ',' << r.n_total << ',' << r.n_els << ',' << r.n_obstructed_minus_square << ','
      << r.n_obstructed_nonsquare << ',' << r.n_undecided_plus_square << ',' << r.n_undecided_other << ','
      << r.n_no_obstruction << ',';
    if (timing) s << std::fixed << std::setprecision(3) << r.wall_time;
    return s.str();
}

}  // namespace dp2bm
