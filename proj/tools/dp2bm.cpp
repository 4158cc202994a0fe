#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include <dp2bm/counting.hpp>
#include <dp2bm/frobenian.hpp>

using namespace dp2bm;
namespace fs = std::filesystem;

namespace {

constexpr int kExitDecided = 0, kExitNone = 1, kExitUndecided = 2, kExitNotEls = 3, kExitUsage = 64;

struct Usage : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string cache_file() {
    const char* dir = std::getenv("BM_CACHE_DIR");
    if (!dir || !*dir) return {};
    return (fs::path(dir) / "factor-cache.txt").string();
}

std::vector<i64> parse_grid(const std::string& s) {
    std::vector<i64> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stoll(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw Usage("bad grid entry '" + item + "'");
        }
    }
    return out;
}

Status parse_status(const std::string& s) {
    if (s == "obstructed") return Status::ObstructionFromA;
    if (s == "undecided") return Status::UndecidedByA;
    if (s == "no-obstruction") return Status::NoObstructionFromA;
    if (s == "not-els") return Status::NotEverywhereLocallySoluble;
    throw Usage("unknown status '" + s + "'");
}

std::ofstream open_out(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Usage("cannot write " + p.string());
    return out;
}

int run_check(const std::array<i64, 3>& a, bool json, i64 height, int precision, bool force) {
    DecisionOptions opt;
    opt.height_cap = height;
    opt.precision_cap = precision;
    opt.force_past_prefilter = force;
    auto d = brauer::has_bm_obstruction(CoefficientTriple::make(a), opt);
    if (json) {
        std::cout << to_json(d).dump(2) << '\n';
    } else {
        std::cout << to_string(d.status);
        if (!d.reason.empty()) std::cout << " (" << d.reason << ')';
        std::cout << '\n';
    }
    switch (d.status) {
        case Status::NotEverywhereLocallySoluble: return kExitNotEls;
        case Status::UndecidedByA: return kExitUndecided;
        default: return kExitDecided;
    }
}

struct CountArgs {
    i64 tmax = 0;
    std::string grid;
    unsigned threads = 1;
    std::string out = ".";
    std::string checkpoint;
    bool timing = false;
    bool fit = false;
    i64 slab = 1;
    u64 abort_after = 100000;
    std::size_t stop_after = 0;
};

int run_count(const CountArgs& a) {
    if (a.tmax < 1) throw Usage("--tmax must be at least 1");
    auto grid = a.grid.empty() ? std::vector<i64>{a.tmax} : parse_grid(a.grid);
    for (i64 T : grid)
        if (T < 1 || T > a.tmax) throw Usage("grid values must lie in [1, tmax]");
    fs::path dir(a.out);
    fs::create_directories(dir);
    CountConfig cfg;
    cfg.threads = a.threads;
    cfg.slab = a.slab;
    cfg.abort_after = a.abort_after;
    cfg.stop_after = a.stop_after;
    cfg.jsonl = (dir / "obstructed.jsonl").string();
    cfg.checkpoint = a.checkpoint.empty() ? (dir / "count.ckpt").string() : a.checkpoint;
    auto res = count_obstructed(a.tmax, grid, cfg);
    if (!res.complete) {
        std::cerr << "stopped early; rerun to resume from " << cfg.checkpoint << '\n';
        return kExitUndecided;
    }
    auto csv = open_out(dir / "counts.csv");
    csv << kCountCsvHeader << '\n';
    bool tainted = false;
    std::vector<std::pair<double, double>> pts;
    for (auto& r : res.rows) {
        csv << csv_row(r, a.timing) << '\n';
        tainted = tainted || r.tainted;
        pts.emplace_back(double(r.T), double(r.n_obstructed_minus_square + r.n_obstructed_nonsquare));
    }
    if (a.fit) {
        try {
            auto f = fit_exponents(pts);
            csv << "# fit obstructed: log N = " << f.c << " + " << f.p << " log T + " << f.q << " log log T; residuals";
            for (double r : f.residuals) csv << ' ' << r;
            csv << '\n';
        } catch (const DegenerateGrid& e) {
            csv << "# fit unavailable: " << e.what() << '\n';
        }
    }
    if (tainted) {
        csv << "# tainted: cap failures exceed 0.1% of ELS triples\n";
        std::cerr << "warning: run is tainted (" << res.rows.back().n_limit_failures << " cap failures)\n";
    }
    return kExitDecided;
}

int run_scan(i64 tmax, const std::string& status, const std::string& out, unsigned threads) {
    if (tmax < 1) throw Usage("--tmax must be at least 1");
    CountConfig cfg;
    cfg.threads = threads;
    cfg.stream = {parse_status(status)};
    fs::path p(out);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    fs::remove(p);
    cfg.jsonl = p.string();
    cfg.abort_after = 0;
    auto res = count_obstructed(tmax, {}, cfg);
    std::cerr << res.rows.back().n_total << " triples scanned\n";
    return kExitDecided;
}

int run_frobenian(const std::string& which, i64 x, u64 limit, const std::string& out) {
    if (x == 0 || arith::is_square(x)) throw Usage("x must be a nonzero non-square");
    std::ostringstream s;
    s << frobenian::kCsvHeader << '\n';
    if (which == "alpha" || which == "beta") {
        if (limit < 10000) throw Usage("--limit must be at least 10000");
        auto fn = which == "alpha" ? frobenian::Function::Alpha : frobenian::Function::Beta;
        std::vector<u64> grid;
        for (u64 X = 10000; X < limit; X *= 10) grid.push_back(X);
        grid.push_back(limit);
        auto claim = frobenian::FrobenianSpec::make(fn, x).claimed_mean;
        for (auto& m : frobenian::mean_estimates(fn, x, grid))
            s << frobenian::csv_row(m.X, frobenian::to_double(m.estimate), claim) << '\n';
    } else if (which == "lambda-sum") {
        if (limit < 1000) throw Usage("--limit must be at least 1000");
        if (limit > frobenian::kSieveCap) throw Usage("--limit above the sieve cap");
        auto r = frobenian::partial_sum_lambda(limit, x);
        // exponent fitted on the two decades ending at each decade mark
        std::vector<u64> marks;
        for (u64 T = 1000; T < limit; T *= 10) marks.push_back(T);
        marks.push_back(limit);
        for (u64 T : marks) {
            auto [M, K] = frobenian::fit_log_power(r.grid, T / 100, T);
            s << frobenian::csv_row(T, M, r.claimed) << '\n';
        }
        s.precision(10);
        s << "# sum " << r.sum << " K " << *r.K << " M " << *r.M << '\n';
    } else {
        throw Usage("--which must be alpha, beta or lambda-sum");
    }
    if (out.empty()) {
        std::cout << s.str();
    } else {
        auto f = open_out(out);
        f << s.str();
    }
    return kExitDecided;
}

int run_oracle(const std::array<i64, 3>& a, i64 height) {
    if (height < 1) throw Usage("--height must be at least 1");
    auto pt = brauer::find_rational_point(CoefficientTriple::make(a), height);
    if (!pt) {
        std::cout << "none\n";
        return kExitNone;
    }
    auto& p = *pt;
    std::cout << '(' << p[0] << ',' << p[1] << ',' << p[2] << ',' << p[3] << ")\n";
    return kExitDecided;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Brauer-Manin obstructions on diagonal quartic del Pezzo surfaces of degree 2"};
    app.require_subcommand(1);

    std::array<i64, 3> a{};
    auto add_coeffs = [&](CLI::App* sub) {
        sub->add_option("A0", a[0])->required();
        sub->add_option("A1", a[1])->required();
        sub->add_option("A2", a[2])->required();
    };

    auto* check = app.add_subcommand("check", "decide one surface a0 x0^4 + a1 x1^4 + a2 x2^4 = w^2");
    add_coeffs(check);
    bool json = false, force = false;
    i64 height = brauer::kMaxSearchHeight;
    int precision = 48;
    check->add_flag("--json", json, "print the full decision record");
    check->add_option("--height", height, "quadric point height cap")->check(CLI::Range(i64(1), brauer::kMaxSearchHeight));
    check->add_option("--precision-cap", precision, "p-adic precision cap")->check(CLI::Range(4, 60));
    check->add_flag("--force", force, "run the invariants even when the prefilter applies");

    auto* count = app.add_subcommand("count", "count obstructed triples with 0 < |a_i| <= T");
    CountArgs ca;
    count->add_option("--tmax", ca.tmax)->required();
    count->add_option("--grid", ca.grid, "comma-separated T values");
    count->add_option("--threads", ca.threads)->check(CLI::Range(1u, 256u));
    count->add_option("--out", ca.out, "output directory");
    count->add_option("--checkpoint", ca.checkpoint);
    count->add_flag("--timing", ca.timing, "fill the seconds column");
    count->add_flag("--fit", ca.fit, "append an exponent fit of the obstructed counts");
    count->add_option("--slab", ca.slab, "a0 values per work unit")->check(CLI::PositiveNumber);
    count->add_option("--abort-after", ca.abort_after, "cap failures tolerated (0: never abort)");
    count->add_option("--stop-after", ca.stop_after, "stop after this many slabs")->group("");

    auto* scan = app.add_subcommand("scan", "stream decision records of one status as JSONL");
    i64 scan_tmax = 0;
    std::string scan_status = "obstructed", scan_out;
    unsigned scan_threads = 1;
    scan->add_option("--tmax", scan_tmax)->required();
    scan->add_option("--status", scan_status, "obstructed, undecided, no-obstruction or not-els");
    scan->add_option("--out", scan_out)->required();
    scan->add_option("--threads", scan_threads)->check(CLI::Range(1u, 256u));

    auto* frob = app.add_subcommand("frobenian", "mean and partial-sum scans");
    std::string which, frob_out;
    i64 x = 0;
    u64 limit = 0;
    frob->add_option("--which", which)->required();
    frob->add_option("--x", x)->required();
    frob->add_option("--limit", limit)->required();
    frob->add_option("--out", frob_out);

    auto* orc = app.add_subcommand("oracle", "search for a rational point");
    add_coeffs(orc);
    i64 orc_height = 10;
    orc->add_option("--height", orc_height)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    std::string cache = cache_file();
    if (!cache.empty()) FactorCache::instance().load(cache);
    int rc = kExitUsage;
    try {
        if (*check) rc = run_check(a, json, height, precision, force);
        else if (*count) rc = run_count(ca);
        else if (*scan) rc = run_scan(scan_tmax, scan_status, scan_out, scan_threads);
        else if (*frob) rc = run_frobenian(which, x, limit, frob_out);
        else if (*orc) rc = run_oracle(a, orc_height);
    } catch (const Usage& e) {
        std::cerr << "usage: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ZeroInput& e) {
        std::cerr << "usage: coefficients must be nonzero\n";
        return kExitUsage;
    } catch (const std::out_of_range& e) {
        std::cerr << "usage: " << e.what() << '\n';
        return kExitUsage;
    } catch (const CheckpointMismatch& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const CountAborted& e) {
        std::cerr << "aborted: " << e.what() << '\n';
        for (auto& t : e.triples) std::cerr << "  " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
        return kExitUndecided;
    }
    if (!cache.empty()) {
        fs::create_directories(fs::path(cache).parent_path());
        FactorCache::instance().save(cache);
    }
    return rc;
}
