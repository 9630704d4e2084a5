#pragma once

// Fans independent (density, mode, seed) runs out over a worker pool and
// merges their metric rows. Run seeds derive from the experiment seed and
// the density/seed pair only, so every mode sees the same initial conditions
// and adding modes never perturbs existing runs.

#include <atomic>
#include <cstdint>
#include <exception>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "vorocover/config.hpp"
#include "vorocover/metrics_io.hpp"
#include "vorocover/rng.hpp"
#include "vorocover/sim.hpp"

namespace vorocover {

inline std::uint64_t run_seed_for(std::uint64_t experiment_seed, const std::string& density_id,
                                  std::uint64_t seed) {
  return derive_seed(derive_seed(experiment_seed, fnv1a(density_id)), seed);
}

struct ExperimentOptions {
  int parallelism_override = -1;          // < 0: use the spec's value
  std::vector<std::uint64_t> seed_override;
  bool export_fields = false;
  std::string output_dir;                 // required when export_fields is set
};

struct RunRecord {
  std::string density_id;
  RunMode mode = RunMode::Vec;
  std::uint64_t seed = 0;
  RunMetrics metrics;
};

struct ExperimentResult {
  std::vector<MetricsRow> rows;
  std::map<std::string, OracleResult> oracles;  // per density
  std::vector<RunRecord> records;               // per run, config order
};

inline ExperimentResult run_experiment(const ExperimentSpec& spec,
                                       const ExperimentOptions& options = {}) {
  ExperimentResult result;
  const std::vector<std::uint64_t>& seeds =
      options.seed_override.empty() ? spec.seeds : options.seed_override;

  // Oracle costs are mode- and seed-independent; compute once per density.
  for (const ScenarioConfig& scenario : spec.scenarios) {
    const ScalarField2D truth = scenario.density.discretize(scenario.domain);
    result.oracles[scenario.density.name] =
        cvt_oracle(truth, scenario.robot_count, scenario.oracle_restarts,
                   derive_seed(scenario.oracle_seed, fnv1a(scenario.density.name)));
  }

  struct Job {
    const ScenarioConfig* scenario;
    RunMode mode;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const ScenarioConfig& scenario : spec.scenarios)
    for (RunMode mode : spec.modes)
      for (std::uint64_t seed : seeds) jobs.push_back({&scenario, mode, seed});

  std::vector<std::vector<MetricsRow>> job_rows(jobs.size());
  std::vector<RunRecord> job_records(jobs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  int workers = options.parallelism_override >= 0 ? options.parallelism_override : spec.parallelism;
  if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min<int>(workers, static_cast<int>(jobs.size())));

  auto work = [&]() {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= jobs.size() || failed.load()) return;
      const Job& job = jobs[k];
      try {
        const std::uint64_t rs = run_seed_for(spec.experiment_seed, job.scenario->density.name, job.seed);
        const double oracle_cost = result.oracles.at(job.scenario->density.name).best_cost;
        RunResult run_result = run(*job.scenario, job.mode, rs, oracle_cost);
        job_rows[k] = rows_from_run(run_result.metrics, job.scenario->density.name, job.mode, job.seed);
        job_records[k] = {job.scenario->density.name, job.mode, job.seed, run_result.metrics};
        if (options.export_fields) {
          const std::string dir = options.output_dir + "/fields/" + job.scenario->density.name +
                                  "__" + mode_name(job.mode) + "__seed" + std::to_string(job.seed);
          export_fields(run_result, dir);
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };

  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  for (std::vector<MetricsRow>& rows : job_rows)
    result.rows.insert(result.rows.end(), rows.begin(), rows.end());
  result.records = std::move(job_records);
  sort_metrics(result.rows);
  return result;
}

}  // namespace vorocover
