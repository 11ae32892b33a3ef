#pragma once

// Layer-replacement experiment: the first k recurrent layers of a base stack
// become non-gated layers (spiking LIF or nonspiking RNN), the rest stay LSTM.
// k = 0 is the pure LSTM baseline and is run once.

#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "snn/training/trainer.hpp"

namespace snn {

/// Runs fn(0..n-1) on up to `jobs` threads. The first exception is rethrown
/// after every worker has stopped.
template <class F>
void parallel_for(std::size_t n, std::size_t jobs, F&& fn) {
    jobs = std::max<std::size_t>(1, std::min(jobs, n));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < jobs; ++w)
        pool.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < n;) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                    next = n;
                }
            }
        });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

struct GridRun {
    std::size_t k = 0;
    bool spiking = false;
    std::string label;  // "k RNN - m LSTM"
    EncoderConfig encoder;
    RunMetrics metrics;

    /// Error report of the last completed epoch, if any was evaluated.
    std::optional<ErrorRateReport> final_report() const {
        for (auto it = metrics.epochs.rbegin(); it != metrics.epochs.rend(); ++it)
            if (it->eval) return it->eval;
        return std::nullopt;
    }

    std::string slug() const {
        return "k" + std::to_string(k) + (k == 0 ? "_baseline" : spiking ? "_spiking" : "_nonspiking");
    }
};

/// The run list in table order: k = 0 (nonspiking only), then for each
/// k = 1..L a spiking and a nonspiking entry.
inline std::vector<GridRun> grid_plan(const EncoderConfig& base) {
    base.validate();
    std::vector<GridRun> plan;
    for (std::size_t k = 0; k <= base.layers.size(); ++k)
        for (bool spiking : {true, false}) {
            if (k == 0 && spiking) continue;
            GridRun r;
            r.k = k;
            r.spiking = spiking;
            r.encoder = replacement_config(base, k, spiking);
            r.label = r.encoder.label();
            plan.push_back(std::move(r));
        }
    return plan;
}

struct GridResult {
    std::vector<GridRun> runs;

    /// Tab-separated table: one row per k, spiking and nonspiking columns.
    /// Cells read "rate [low, high]", "diverged", or stay empty.
    std::string table() const {
        auto cell = [](const GridRun* r) -> std::string {
            if (!r) return "";
            if (r->metrics.diverged) return "diverged";
            const auto rep = r->final_report();
            if (!rep) return "";
            char buf[96];
            std::snprintf(buf, sizeof buf, "%.4f [%.4f, %.4f]", rep->rate, rep->low, rep->high);
            return buf;
        };
        std::string out = "encoder\tspiking\tnonspiking\n";
        std::size_t max_k = 0;
        for (const auto& r : runs) max_k = std::max(max_k, r.k);
        for (std::size_t k = 0; k <= max_k; ++k) {
            const GridRun *spk = nullptr, *non = nullptr;
            for (const auto& r : runs)
                if (r.k == k) (r.spiking ? spk : non) = &r;
            const GridRun* any = spk ? spk : non;
            if (!any) continue;
            out += any->label + "\t" + cell(spk) + "\t" + cell(non) + "\n";
        }
        return out;
    }
};

/// Trains every grid entry from the same seed. A diverged run is recorded and
/// the remaining runs continue.
inline GridResult replacement_grid(const TrainConfig& base, const Dataset& train, const Dataset* test, std::size_t jobs = 1) {
    GridResult result;
    result.runs = grid_plan(base.encoder);
    parallel_for(result.runs.size(), jobs, [&](std::size_t i) {
        TrainConfig cfg = base;
        cfg.encoder = result.runs[i].encoder;
        result.runs[i].metrics = train_run(cfg, train, test).metrics;
    });
    return result;
}

/// results.tsv plus runs/<slug>/metrics.txt for every entry.
inline void write_grid(const std::filesystem::path& dir, const GridResult& result) {
    std::filesystem::create_directories(dir / "runs");
    std::ofstream table(dir / "results.tsv");
    table << result.table();
    if (!table) throw std::runtime_error("cannot write " + (dir / "results.tsv").string());
    for (const auto& r : result.runs) {
        const auto run_dir = dir / "runs" / r.slug();
        std::filesystem::create_directories(run_dir);
        std::ofstream m(run_dir / "metrics.txt");
        r.metrics.write_stream(m);
        std::ofstream e(run_dir / "encoder.json");
        e << r.encoder.to_json().dump(2) << '\n';
        if (!m || !e) throw std::runtime_error("cannot write run outputs under " + run_dir.string());
    }
}

}  // namespace snn
