#include "qcov/experiments.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>
#include <utility>

#include "json.hpp"

#include "qcov/bounds.hpp"
#include "qcov/quantize.hpp"

namespace qcov {

namespace {

using nlohmann::json;

[[noreturn]] void bad_config(const std::string& msg) {
  throw config_error(msg);
}

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

long long require_int(const json& j, const char* what) {
  if (!j.is_number_integer() && !j.is_number_unsigned())
    bad_config(std::string(what) + " must be an integer");
  return j.get<long long>();
}

std::size_t require_size(const json& j, const char* what) {
  long long v = require_int(j, what);
  if (v < 0) bad_config(std::string(what) + " must be >= 0");
  return std::size_t(v);
}

double require_number(const json& j, const char* what) {
  if (!j.is_number()) bad_config(std::string(what) + " must be a number");
  return j.get<double>();
}

std::string require_string(const json& j, const char* what) {
  if (!j.is_string()) bad_config(std::string(what) + " must be a string");
  return j.get<std::string>();
}

// A size list is a number, an array of numbers, or {"from","to","step"} /
// {"from","to","factor"}.
std::vector<std::size_t> parse_size_list(const json& j, const char* what) {
  std::vector<std::size_t> out;
  if (j.is_number()) {
    out.push_back(require_size(j, what));
  } else if (j.is_array()) {
    for (const auto& e : j) out.push_back(require_size(e, what));
  } else if (j.is_object()) {
    for (const auto& [k, v] : j.items())
      if (k != "from" && k != "to" && k != "step" && k != "factor")
        bad_config(std::string(what) + " range: unknown key " + k);
    if (!j.contains("from") || !j.contains("to"))
      bad_config(std::string(what) + " range needs from and to");
    bool has_step = j.contains("step"), has_factor = j.contains("factor");
    if (has_step == has_factor)
      bad_config(std::string(what) + " range needs step or factor, not both");
    std::size_t from = require_size(j.at("from"), what);
    std::size_t to = require_size(j.at("to"), what);
    if (from == 0 || from > to)
      bad_config(std::string(what) + " range needs 1 <= from <= to");
    if (has_step) {
      std::size_t step = require_size(j.at("step"), what);
      if (step == 0) bad_config(std::string(what) + " range step must be >= 1");
      for (std::size_t v = from; v <= to; v += step) out.push_back(v);
    } else {
      double factor = require_number(j.at("factor"), what);
      if (!(factor > 1.0))
        bad_config(std::string(what) + " range factor must be > 1");
      for (std::size_t v = from; v <= to;) {
        out.push_back(v);
        std::size_t next = std::size_t(std::llround(double(v) * factor));
        if (next <= v) break;
        v = next;
      }
    }
  } else {
    bad_config(std::string(what) + " must be a number, array, or range");
  }
  if (out.empty()) bad_config(std::string(what) + " resolved to no values");
  return out;
}

MaskSpec parse_mask_spec(const std::string& s) {
  MaskSpec spec;
  if (s == "full") return spec;
  if (s == "identity") {
    spec.kind = MaskSpec::Kind::identity;
    return spec;
  }
  if (s.rfind("band:", 0) == 0) {
    spec.kind = MaskSpec::Kind::band;
    const char* first = s.data() + 5;
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, spec.band_width);
    if (ec != std::errc() || ptr != last || first == last)
      bad_config("mask band needs an integer width, got \"" + s + "\"");
    return spec;
  }
  if (s.rfind("file:", 0) == 0) {
    spec.kind = MaskSpec::Kind::file;
    spec.path = s.substr(5);
    if (spec.path.empty()) bad_config("mask file needs a path");
    return spec;
  }
  bad_config("unknown mask \"" + s +
             "\" (want full, identity, band:W, or file:PATH)");
}

// ---------------------------------------------------------------------------
// Deterministic parallel trial execution.
//
// One setting = one (experiment variant, p, n, c) cell with its truth matrix
// and estimator list. One task = one trial of one setting; every task seeds
// its own RNG streams from (config seed, hash of "<setting key>|t<k>|x" /
// "...|tau"), so results are independent of scheduling and thread count.

struct Setting {
  std::string experiment_id;
  std::string key;  // unique stream-label prefix
  std::size_t p;
  std::size_t n;
  double c;
  SymMatrix sigma;
  Matrix chol;
  Mask mask;
  std::vector<EstimatorKind> estimators;
};

struct CellResults {
  std::vector<double> err;
  std::vector<std::int64_t> ms;
};

std::string sanitize_for_path(std::string s) {
  for (char& ch : s) {
    if (ch == '|') ch = '_';
    if (ch == '/') ch = '-';
  }
  return s;
}

std::string trial_label(const Setting& s, std::size_t trial) {
  return s.key + "|t" + std::to_string(trial);
}

std::vector<std::vector<CellResults>> run_trials(
    const std::vector<Setting>& settings, std::size_t trials,
    std::uint64_t seed, unsigned threads, ErrorMetric metric, bool timing,
    const std::string& dump_dir) {
  std::vector<std::vector<CellResults>> results(settings.size());
  for (std::size_t s = 0; s < settings.size(); ++s)
    results[s].assign(settings[s].estimators.size(),
                      CellResults{std::vector<double>(trials, 0.0),
                                  std::vector<std::int64_t>(trials, 0)});
  if (!dump_dir.empty()) std::filesystem::create_directories(dump_dir);

  const std::size_t total = settings.size() * trials;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto run_one = [&](std::size_t task) {
    const std::size_t s = task / trials, t = task % trials;
    const Setting& st = settings[s];
    std::string label = trial_label(st, t);
    RngStream xs(seed, stream_id_of(label + "|x"));
    SampleBatch batch = sample_gaussian(st.chol, st.n, xs);
    if (!dump_dir.empty() && t == 0)
      write_block((std::filesystem::path(dump_dir) /
                   (sanitize_for_path(st.key) + ".qblk"))
                      .string(),
                  sign_pack(batch));

    std::optional<DitheredPairBlock> pair;
    for (std::size_t e = 0; e < st.estimators.size(); ++e) {
      const EstimatorKind& est = st.estimators[e];
      auto started = std::chrono::steady_clock::now();
      SymMatrix value(st.p);
      switch (est.tag) {
        case EstimatorKind::Tag::sample:
          value = sample_cov(batch);
          break;
        case EstimatorKind::Tag::one_bit_sine:
          value = one_bit_sine(sign_pack(batch));
          break;
        case EstimatorKind::Tag::dithered_raw:
        case EstimatorKind::Tag::dithered_psd: {
          if (!pair) {
            RngStream ts(seed, stream_id_of(label + "|tau"));
            pair = dithered_pack(batch, *est.lambda, ts);
          }
          value = dithered_estimate(
              *pair, est.tag == EstimatorKind::Tag::dithered_psd);
          break;
        }
      }
      results[s][e].err[t] = estimation_error(value, st.sigma, st.mask, metric);
      if (timing)
        results[s][e].ms[t] =
            std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now() - started)
                .count();
    }
  };

  auto worker = [&] {
    while (!stop.load(std::memory_order_relaxed)) {
      std::size_t task = next.fetch_add(1);
      if (task >= total) break;
      try {
        run_one(task);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        stop = true;
      }
    }
  };

  unsigned pool = std::min<std::size_t>(threads, std::max<std::size_t>(total, 1));
  if (pool <= 1) {
    worker();
  } else {
    std::vector<std::thread> team;
    team.reserve(pool);
    for (unsigned i = 0; i < pool; ++i) team.emplace_back(worker);
    for (auto& th : team) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return results;
}

// Raw rows for every setting/estimator/trial in deterministic order, then
// mean (trial -1) and standard-error (trial -2) rows appended per cell.
std::vector<TrialRecord> assemble_records(
    const std::vector<Setting>& settings,
    const std::vector<std::vector<CellResults>>& results, std::size_t trials,
    std::uint64_t config_seed) {
  std::vector<TrialRecord> records;
  for (std::size_t s = 0; s < settings.size(); ++s) {
    const Setting& st = settings[s];
    for (std::size_t e = 0; e < st.estimators.size(); ++e) {
      const EstimatorKind& est = st.estimators[e];
      for (std::size_t t = 0; t < trials; ++t) {
        TrialRecord r;
        r.experiment = st.experiment_id;
        r.estimator = std::string(EstimatorKind::tag_name(est.tag));
        r.p = st.p;
        r.n = st.n;
        r.c = st.c;
        r.lambda = est.lambda;
        r.trial = std::int64_t(t);
        r.seed = stream_id_of(trial_label(st, t) + "|x");
        r.error = results[s][e].err[t];
        r.ms = results[s][e].ms[t];
        records.push_back(std::move(r));
      }
    }
  }
  for (std::size_t s = 0; s < settings.size(); ++s) {
    const Setting& st = settings[s];
    for (std::size_t e = 0; e < st.estimators.size(); ++e) {
      const EstimatorKind& est = st.estimators[e];
      const std::vector<double>& err = results[s][e].err;
      double mean = 0.0;
      for (double x : err) mean += x;
      mean /= double(trials);
      double se = 0.0;
      if (trials > 1) {
        double var = 0.0;
        for (double x : err) var += (x - mean) * (x - mean);
        var /= double(trials - 1);
        se = std::sqrt(var / double(trials));
      }
      TrialRecord base;
      base.experiment = st.experiment_id;
      base.estimator = std::string(EstimatorKind::tag_name(est.tag));
      base.p = st.p;
      base.n = st.n;
      base.c = st.c;
      base.lambda = est.lambda;
      base.seed = config_seed;
      TrialRecord mean_row = base;
      mean_row.trial = -1;
      mean_row.error = mean;
      records.push_back(std::move(mean_row));
      TrialRecord se_row = base;
      se_row.trial = -2;
      se_row.error = se;
      records.push_back(std::move(se_row));
    }
  }
  return records;
}

EstimatorKind make_estimator(EstimatorKind::Tag tag,
                             std::optional<double> lambda = std::nullopt) {
  EstimatorKind k;
  k.tag = tag;
  k.lambda = lambda;
  k.validate();
  return k;
}

std::string setting_key(const std::string& experiment_id, std::size_t p,
                        std::size_t n, double c) {
  return experiment_id + "|p" + std::to_string(p) + "|n" + std::to_string(n) +
         "|c" + format_double(c);
}

Setting make_setting(const ExperimentConfig& cfg,
                     const std::string& experiment_id, const CovModel& model,
                     std::size_t n, double c,
                     std::vector<EstimatorKind> estimators,
                     const std::string& key_suffix = "") {
  SymMatrix sigma = build_cov(model);
  Matrix chol = cholesky(sigma);
  std::string key = setting_key(experiment_id, sigma.dim(), n, c) + key_suffix;
  Mask mask = build_mask(cfg.mask, sigma.dim());
  return Setting{experiment_id, std::move(key),     sigma.dim(), n, c,
                 std::move(sigma), std::move(chol), std::move(mask),
                 std::move(estimators)};
}

// The documented dither level rule lambda = sqrt(log(n) * max_norm(sigma)),
// used whenever an experiment needs a dithered run without its own grid
// search.
double lambda_rule(const SymMatrix& sigma, std::size_t n) {
  if (n < 2)
    bad_config("dithered estimation by the log(n) rule needs n >= 2");
  return std::sqrt(std::log(double(n)) * max_norm(sigma));
}

double tuned_lambda(const ExperimentConfig& cfg, const SymMatrix& sigma,
                    std::size_t n, const std::string& key, unsigned threads) {
  return tune_lambda(sigma, n, cfg.trials, cfg.lambda_grid_points, cfg.seed,
                     threads, key + "|tune")
      .lambda_star;
}

std::vector<TrialRecord> bound_rows(const ExperimentConfig& cfg,
                                    const Setting& st, double lambda) {
  BoundReport up = one_bit_error_bound(st.sigma, st.mask, st.n, cfg.t);
  BoundReport dith =
      dithered_error_bound(st.sigma, st.mask, st.n, cfg.t, lambda);
  LowerBoundReport low = error_lower_bound(st.sigma, st.mask, st.n);

  auto row = [&](const std::string& name, double value,
                 std::optional<double> lam) {
    TrialRecord r;
    r.experiment = st.experiment_id;
    r.estimator = name;
    r.p = st.p;
    r.n = st.n;
    r.c = st.c;
    r.lambda = lam;
    r.trial = -1;
    r.seed = cfg.seed;
    r.error = value;
    return r;
  };

  return {
      row("one_bit_bound_leading", up.leading_term, std::nullopt),
      row("one_bit_bound_second", up.second_term, std::nullopt),
      row("one_bit_bound_total", up.total, std::nullopt),
      row("dithered_bound_leading", dith.leading_term, lambda),
      row("dithered_bound_second", dith.second_term, lambda),
      row("dithered_bound_total", dith.total, lambda),
      row("lower_bound_leading", low.leading_term, std::nullopt),
      row("lower_bound_second", low.second_term, std::nullopt),
      row("lower_bound_third", low.third_term, std::nullopt),
      row("lower_bound_total", low.total, std::nullopt),
      row("lower_bound_remainder", low.remainder, std::nullopt),
  };
}

}  // namespace

ExperimentKind parse_experiment(std::string_view name) {
  std::string s(name);
  for (char& ch : s)
    if (ch == '_') ch = '-';
  for (ExperimentKind k :
       {ExperimentKind::compare_all, ExperimentKind::lambda_sweep,
        ExperimentKind::optimal_lambda, ExperimentKind::correlation,
        ExperimentKind::diagonal, ExperimentKind::rate_check,
        ExperimentKind::bounds_sweep})
    if (s == experiment_name(k)) return k;
  bad_config("unknown experiment \"" + std::string(name) + "\"");
}

std::string_view experiment_name(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::compare_all: return "compare-all";
    case ExperimentKind::lambda_sweep: return "lambda-sweep";
    case ExperimentKind::optimal_lambda: return "optimal-lambda";
    case ExperimentKind::correlation: return "correlation";
    case ExperimentKind::diagonal: return "diagonal";
    case ExperimentKind::rate_check: return "rate-check";
    case ExperimentKind::bounds_sweep: return "bounds-sweep";
  }
  return "";
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) bad_config("cannot open config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    bad_config("config is not valid JSON: " + std::string(e.what()));
  }
  if (!j.is_object()) bad_config("config root must be a JSON object");

  static const std::set<std::string> allowed = {
      "experiment", "p",        "n",           "trials",
      "seed",       "c",        "spike_index", "spike_value",
      "lambda_grid_points",     "metric",      "mask",
      "estimator",  "t",        "out",         "threads",
      "timing",     "dump_bits_dir"};
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!allowed.count(key)) bad_config("unknown config key \"" + key + "\"");
  }

  ExperimentConfig cfg;
  if (!j.contains("experiment")) bad_config("config needs \"experiment\"");
  cfg.experiment = parse_experiment(require_string(j["experiment"], "experiment"));
  if (!j.contains("p") || !j.contains("n"))
    bad_config("config needs \"p\" and \"n\"");
  cfg.p_values = parse_size_list(j["p"], "p");
  cfg.n_values = parse_size_list(j["n"], "n");

  if (j.contains("trials")) cfg.trials = require_size(j["trials"], "trials");
  if (j.contains("seed")) {
    long long v = require_int(j["seed"], "seed");
    if (v < 0) bad_config("seed must be >= 0");
    cfg.seed = std::uint64_t(v);
  }
  if (j.contains("c")) {
    cfg.correlations.clear();
    if (j["c"].is_array())
      for (const auto& e : j["c"])
        cfg.correlations.push_back(require_number(e, "c"));
    else
      cfg.correlations.push_back(require_number(j["c"], "c"));
  }
  if (j.contains("spike_index"))
    cfg.spike_index = require_size(j["spike_index"], "spike_index");
  if (j.contains("spike_value"))
    cfg.spike_value = require_number(j["spike_value"], "spike_value");
  if (j.contains("lambda_grid_points"))
    cfg.lambda_grid_points =
        require_size(j["lambda_grid_points"], "lambda_grid_points");
  if (j.contains("metric")) {
    try {
      cfg.metric = parse_metric(require_string(j["metric"], "metric"));
    } catch (const std::invalid_argument& e) {
      bad_config(e.what());
    }
  }
  if (j.contains("mask"))
    cfg.mask = parse_mask_spec(require_string(j["mask"], "mask"));
  if (j.contains("estimator"))
    cfg.estimator = require_string(j["estimator"], "estimator");
  if (j.contains("t")) cfg.t = require_number(j["t"], "t");
  if (j.contains("out")) cfg.out = require_string(j["out"], "out");
  if (j.contains("threads"))
    cfg.threads = unsigned(require_size(j["threads"], "threads"));
  if (j.contains("timing")) {
    if (!j["timing"].is_boolean()) bad_config("timing must be a boolean");
    cfg.timing = j["timing"].get<bool>();
  }
  if (j.contains("dump_bits_dir"))
    cfg.dump_bits_dir = require_string(j["dump_bits_dir"], "dump_bits_dir");
  return cfg;
}

void validate_config(const ExperimentConfig& cfg) {
  if (cfg.trials < 1) bad_config("trials must be >= 1");
  if (cfg.p_values.empty()) bad_config("p resolved to no values");
  if (cfg.n_values.empty()) bad_config("n resolved to no values");
  for (std::size_t p : cfg.p_values)
    if (p == 0) bad_config("p must be >= 1");
  for (std::size_t n : cfg.n_values)
    if (n == 0) bad_config("n must be >= 1");
  if (cfg.correlations.empty()) bad_config("c resolved to no values");

  std::size_t p_min = cfg.p_values.front(), p_max = cfg.p_values.front();
  for (std::size_t p : cfg.p_values) {
    p_min = std::min(p_min, p);
    p_max = std::max(p_max, p);
  }
  double lo = p_max > 1 ? -1.0 / double(p_max - 1) : -1.0;
  for (double c : cfg.correlations)
    if (!(c > lo && c <= 1.0))
      bad_config("correlation " + format_double(c) +
                 " outside the PSD range (" + format_double(lo) +
                 ", 1] for p=" + std::to_string(p_max));

  if (cfg.lambda_grid_points < 2) bad_config("lambda_grid_points must be >= 2");
  if (cfg.spike_index < 1 || cfg.spike_index > p_min)
    bad_config("spike_index must be in 1..min(p)");
  if (!(cfg.spike_value > 0.0)) bad_config("spike_value must be > 0");
  if (!(cfg.t >= 0.0)) bad_config("t must be >= 0");
  if (cfg.mask.kind == MaskSpec::Kind::band && cfg.mask.band_width >= p_min)
    bad_config("mask band width must stay < min(p)");
  try {
    EstimatorKind::parse_tag(cfg.estimator);
  } catch (const std::invalid_argument& e) {
    bad_config(e.what());
  }
}

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("QCOV_THREADS")) {
    unsigned v = 0;
    const char* last = env + std::string_view(env).size();
    auto [ptr, ec] = std::from_chars(env, last, v);
    if (ec != std::errc() || ptr != last || v == 0)
      bad_config("QCOV_THREADS must be a positive integer, got \"" +
                 std::string(env) + "\"");
    return v;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? hw : 1;
}

Mask build_mask(const MaskSpec& spec, std::size_t p) {
  switch (spec.kind) {
    case MaskSpec::Kind::full:
      return Mask::full(p);
    case MaskSpec::Kind::identity:
      return Mask::identity(p);
    case MaskSpec::Kind::band:
      if (spec.band_width >= p)
        bad_config("mask band width " + std::to_string(spec.band_width) +
                   " must stay < p=" + std::to_string(p));
      return Mask::band(p, spec.band_width);
    case MaskSpec::Kind::file: {
      std::ifstream in(spec.path);
      if (!in) bad_config("cannot open mask file " + spec.path);
      Matrix m(p, p);
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j)
          if (!(in >> m(i, j)))
            bad_config("mask file " + spec.path + " needs " +
                       std::to_string(p * p) + " numbers");
      double extra;
      if (in >> extra)
        bad_config("mask file " + spec.path + " has more than " +
                   std::to_string(p * p) + " numbers");
      SymMatrix sym(p);
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
          if (m(i, j) != m(j, i))
            bad_config("mask file " + spec.path + " is not symmetric");
          if (!(m(i, j) >= 0.0 && m(i, j) <= 1.0))
            bad_config("mask file " + spec.path + " entry " +
                       format_double(m(i, j)) + " outside [0, 1]");
          sym.set(i, j, m(i, j));
        }
      return Mask(std::move(sym));
    }
  }
  bad_config("unreachable mask kind");
}

std::size_t argmin_index(const std::vector<std::pair<double, double>>& curve) {
  if (curve.empty())
    throw std::invalid_argument("argmin_index: empty curve");
  std::size_t best = 0;
  for (std::size_t i = 1; i < curve.size(); ++i)
    if (curve[i].second < curve[best].second) best = i;
  return best;
}

std::string to_csv(const std::vector<TrialRecord>& records) {
  std::string out = "experiment,estimator,p,n,c,lambda,trial,seed,error,ms\n";
  for (const TrialRecord& r : records) {
    out += r.experiment;
    out += ',';
    out += r.estimator;
    out += ',';
    out += std::to_string(r.p);
    out += ',';
    out += std::to_string(r.n);
    out += ',';
    out += format_double(r.c);
    out += ',';
    if (r.lambda) out += format_double(*r.lambda);
    out += ',';
    out += std::to_string(r.trial);
    out += ',';
    out += std::to_string(r.seed);
    out += ',';
    out += format_double(r.error);
    out += ',';
    out += std::to_string(r.ms);
    out += '\n';
  }
  return out;
}

void write_csv(const std::string& path,
               const std::vector<TrialRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) bad_config("cannot open output file " + path);
  out << to_csv(records);
  out.flush();
  if (!out) throw std::runtime_error("write to " + path + " failed");
}

TuneResult tune_lambda(const SymMatrix& sigma, std::size_t n,
                       std::size_t trials, std::size_t grid_points,
                       std::uint64_t seed, unsigned threads,
                       std::string_view stream_tag) {
  if (grid_points < 2)
    throw std::invalid_argument("tune_lambda: need at least 2 grid points");
  if (trials < 1) throw std::invalid_argument("tune_lambda: need trials >= 1");
  if (n < 1) throw std::invalid_argument("tune_lambda: need n >= 1");
  double top = 4.0 * max_norm(sigma);
  if (!(top > 0.0))
    throw std::invalid_argument("tune_lambda: sigma must be nonzero");

  Matrix chol = cholesky(sigma);
  Mask full = Mask::full(sigma.dim());
  std::vector<Setting> settings;
  settings.reserve(grid_points);
  for (std::size_t i = 0; i < grid_points; ++i) {
    double lambda = top * double(i + 1) / double(grid_points);
    settings.push_back(Setting{
        "tune",
        std::string(stream_tag) + "|g" + std::to_string(i),
        sigma.dim(), n, 0.0, sigma, chol, full,
        {make_estimator(EstimatorKind::Tag::dithered_psd, lambda)}});
  }

  auto results = run_trials(settings, trials, seed, threads,
                            ErrorMetric::operator_norm, false, "");

  TuneResult out;
  out.curve.reserve(grid_points);
  for (std::size_t i = 0; i < grid_points; ++i) {
    double mean = 0.0;
    for (double x : results[i][0].err) mean += x;
    out.curve.emplace_back(*settings[i].estimators[0].lambda,
                           mean / double(trials));
  }
  out.lambda_star = out.curve[argmin_index(out.curve)].first;
  return out;
}

std::vector<TrialRecord> run_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  unsigned threads = resolve_threads(cfg.threads);

  std::vector<Setting> settings;
  std::vector<TrialRecord> extra_rows;  // appended after the aggregates

  auto for_each_cell = [&](auto&& fn) {
    for (std::size_t p : cfg.p_values)
      for (std::size_t n : cfg.n_values)
        for (double c : cfg.correlations) fn(p, n, c);
  };

  switch (cfg.experiment) {
    case ExperimentKind::compare_all:
      for_each_cell([&](std::size_t p, std::size_t n, double c) {
        CovModel model = CovModel::equicorrelation(p, c);
        SymMatrix sigma = build_cov(model);
        std::string key = setting_key("compare-all", p, n, c);
        double lambda = tuned_lambda(cfg, sigma, n, key, threads);
        settings.push_back(make_setting(
            cfg, "compare-all", model, n, c,
            {make_estimator(EstimatorKind::Tag::sample),
             make_estimator(EstimatorKind::Tag::one_bit_sine),
             make_estimator(EstimatorKind::Tag::dithered_raw, lambda),
             make_estimator(EstimatorKind::Tag::dithered_psd, lambda)}));
      });
      break;

    case ExperimentKind::lambda_sweep:
      for_each_cell([&](std::size_t p, std::size_t n, double c) {
        CovModel model = CovModel::equicorrelation(p, c);
        SymMatrix sigma = build_cov(model);
        double top = 4.0 * max_norm(sigma);
        for (std::size_t i = 0; i < cfg.lambda_grid_points; ++i) {
          double lambda = top * double(i + 1) / double(cfg.lambda_grid_points);
          settings.push_back(make_setting(
              cfg, "lambda-sweep", model, n, c,
              {make_estimator(EstimatorKind::Tag::dithered_psd, lambda)},
              "|g" + std::to_string(i)));
        }
      });
      break;

    case ExperimentKind::optimal_lambda:
      for_each_cell([&](std::size_t p, std::size_t n, double c) {
        SymMatrix sigma = build_cov(CovModel::equicorrelation(p, c));
        std::string key = setting_key("optimal-lambda", p, n, c);
        TuneResult tuned =
            tune_lambda(sigma, n, cfg.trials, cfg.lambda_grid_points, cfg.seed,
                        threads, key + "|tune");
        auto row = [&](const std::string& estimator, double lambda,
                       double error) {
          TrialRecord r;
          r.experiment = "optimal-lambda";
          r.estimator = estimator;
          r.p = p;
          r.n = n;
          r.c = c;
          r.lambda = lambda;
          r.trial = -1;
          r.seed = cfg.seed;
          r.error = error;
          return r;
        };
        for (const auto& [lambda, error] : tuned.curve)
          extra_rows.push_back(row("dithered_psd", lambda, error));
        std::size_t best = argmin_index(tuned.curve);
        extra_rows.push_back(
            row("lambda_star", tuned.lambda_star, tuned.curve[best].second));
      });
      break;

    case ExperimentKind::correlation:
      for_each_cell([&](std::size_t p, std::size_t n, double c) {
        settings.push_back(make_setting(
            cfg, "correlation", CovModel::equicorrelation(p, c), n, c,
            {make_estimator(EstimatorKind::Tag::sample),
             make_estimator(EstimatorKind::Tag::one_bit_sine)}));
      });
      break;

    case ExperimentKind::diagonal:
      for_each_cell([&](std::size_t p, std::size_t n, double c) {
        for (bool spiked : {false, true}) {
          CovModel model =
              spiked ? CovModel::spiked(p, c, cfg.spike_index, cfg.spike_value)
                     : CovModel::equicorrelation(p, c);
          std::string id = spiked ? "diagonal/spiked" : "diagonal/flat";
          SymMatrix sigma = build_cov(model);
          std::string key = setting_key(id, p, n, c);
          double lambda = tuned_lambda(cfg, sigma, n, key, threads);
          settings.push_back(make_setting(
              cfg, id, model, n, c,
              {make_estimator(EstimatorKind::Tag::sample),
               make_estimator(EstimatorKind::Tag::dithered_psd, lambda)}));
        }
      });
      break;

    case ExperimentKind::rate_check:
      for_each_cell([&](std::size_t p, std::size_t n, double c) {
        CovModel model = CovModel::equicorrelation(p, c);
        EstimatorKind est;
        est.tag = EstimatorKind::parse_tag(cfg.estimator);
        if (est.dithered()) est.lambda = lambda_rule(build_cov(model), n);
        est.validate();
        settings.push_back(
            make_setting(cfg, "rate-check", model, n, c, {est}));
      });
      break;

    case ExperimentKind::bounds_sweep:
      for_each_cell([&](std::size_t p, std::size_t n, double c) {
        CovModel model = CovModel::equicorrelation(p, c);
        SymMatrix sigma = build_cov(model);
        double lambda = lambda_rule(sigma, n);
        settings.push_back(make_setting(
            cfg, "bounds-sweep", model, n, c,
            {make_estimator(EstimatorKind::Tag::one_bit_sine),
             make_estimator(EstimatorKind::Tag::dithered_psd, lambda)}));
      });
      break;
  }

  auto results = run_trials(settings, cfg.trials, cfg.seed, threads,
                            cfg.metric, cfg.timing, cfg.dump_bits_dir);
  std::vector<TrialRecord> records =
      assemble_records(settings, results, cfg.trials, cfg.seed);

  if (cfg.experiment == ExperimentKind::bounds_sweep)
    for (const Setting& st : settings) {
      double lambda = *st.estimators.back().lambda;
      for (TrialRecord& r : bound_rows(cfg, st, lambda))
        records.push_back(std::move(r));
    }
  for (TrialRecord& r : extra_rows) records.push_back(std::move(r));

  if (!cfg.out.empty()) write_csv(cfg.out, records);
  return records;
}

RateCheckResult rate_check(const ExperimentConfig& cfg) {
  if (cfg.experiment != ExperimentKind::rate_check)
    bad_config("rate_check needs a rate-check config");
  validate_config(cfg);
  if (cfg.p_values.size() != 1 || cfg.correlations.size() != 1)
    bad_config("rate-check wants a single (p, c) setting");
  if (cfg.n_values.size() < 4)
    bad_config("rate-check needs at least 4 n-values");
  std::size_t n_min = cfg.n_values.front(), n_max = cfg.n_values.front();
  for (std::size_t n : cfg.n_values) {
    n_min = std::min(n_min, n);
    n_max = std::max(n_max, n);
  }
  if (double(n_max) < 10.0 * double(n_min))
    bad_config("rate-check needs n-values spanning at least a decade");

  RateCheckResult out;
  out.records = run_experiment(cfg);

  std::vector<std::pair<double, double>> points;  // (log n, log mean)
  bool all_tiny = true;
  for (const TrialRecord& r : out.records) {
    if (r.trial != -1) continue;
    if (r.error > 1e-12) all_tiny = false;
  }
  out.exact_zero = all_tiny;
  if (all_tiny) return out;

  for (const TrialRecord& r : out.records) {
    if (r.trial != -1) continue;
    if (!(r.error > 0.0))
      throw numerical_error(
          "rate_check: mean error vanished at one n but not all; cannot fit "
          "a log-log slope");
    points.emplace_back(std::log(double(r.n)), std::log(r.error));
  }
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : points) {
    mx += x;
    my += y;
  }
  mx /= double(points.size());
  my /= double(points.size());
  double sxy = 0.0, sxx = 0.0;
  for (const auto& [x, y] : points) {
    sxy += (x - mx) * (y - my);
    sxx += (x - mx) * (x - mx);
  }
  out.slope = sxy / sxx;
  return out;
}

}  // namespace qcov
