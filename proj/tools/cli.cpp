#include "cli.hpp"

#include "ifeatt/ifeatt.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

namespace ifeatt::cli {

using nlohmann::json;

namespace {

template <typename T>
void read_key(const json& obj, const char* key, T& target) {
  if (obj.contains(key) && !obj.at(key).is_null()) target = obj.at(key).get<T>();
}

// Finite numbers pass through; anything else becomes null plus "<key>_reason".
void put_number(json& obj, const std::string& key, double value, const std::string& reason) {
  if (std::isfinite(value)) {
    obj[key] = value;
  } else {
    obj[key] = nullptr;
    obj[key + "_reason"] = reason;
  }
}

void put_null(json& obj, const std::string& key, const std::string& reason) {
  obj[key] = nullptr;
  obj[key + "_reason"] = reason;
}

std::string period_label(const std::vector<std::string>& labels, int t) {
  const auto idx = static_cast<std::size_t>(t - 1);
  return idx < labels.size() ? labels[idx] : std::to_string(t);
}

void emit_json(const json& doc, const RunConfig& cfg, std::ostream& out) {
  if (cfg.output.empty()) {
    out << doc.dump(2) << '\n';
    return;
  }
  std::ofstream file(cfg.output);
  if (!file) throw Error(ErrorCode::IoError, "cannot write " + cfg.output);
  file << doc.dump(2) << '\n';
}

ModelSpec model_spec(const RunConfig& cfg, const std::vector<std::string>& names) {
  if (cfg.w_cols.empty()) {
    throw Error(ErrorCode::SpecMismatch,
                "the ife estimator needs at least one covariate with a time-invariant effect (--w)");
  }
  std::vector<std::string> x = cfg.x_cols;
  if (x.empty()) {
    for (const auto& name : names) {
      if (std::find(cfg.w_cols.begin(), cfg.w_cols.end(), name) == cfg.w_cols.end()) x.push_back(name);
    }
  }
  return resolve_spec(names, x, cfg.w_cols);
}

BootstrapOptions bootstrap_options(const RunConfig& cfg) {
  BootstrapOptions opts;
  opts.reps = cfg.bootstrap_reps;
  opts.seed = cfg.seed;
  opts.threads = cfg.threads;
  opts.level = cfg.level;
  return opts;
}

json estimates_json(const AttSeries& series, const std::vector<std::string>& labels) {
  json arr = json::array();
  for (std::size_t j = 0; j < series.periods.size(); ++j) {
    const int t = series.periods[j];
    json e;
    e["period"] = t;
    e["label"] = period_label(labels, t);
    e["pre_treatment"] = t < series.t_star;
    put_number(e, "att", series.att(static_cast<Index>(j)), "estimate is not finite");
    arr.push_back(std::move(e));
  }
  return arr;
}

// Standard errors and intervals from the delta method and/or the bootstrap.
void inference_json(json& doc, const AttSeries& series, const BootstrapResult* boot,
                    const RunConfig& cfg, const std::string& no_analytic_reason) {
  json ses = json::array();
  json cis = json::array();
  const double z_crit = std::sqrt(gmm::chi2_quantile(cfg.level, 1));
  for (std::size_t j = 0; j < series.periods.size(); ++j) {
    const int t = series.periods[j];
    const double att = series.att(static_cast<Index>(j));
    json s;
    json c;
    s["period"] = t;
    c["period"] = t;
    c["level"] = cfg.level;
    if (const auto se = series.se_at(t)) {
      put_number(s, "delta", *se, "delta-method variance is not finite");
      put_number(c, "normal_lower", att - z_crit * *se, "delta-method variance is not finite");
      put_number(c, "normal_upper", att + z_crit * *se, "delta-method variance is not finite");
    } else {
      put_null(s, "delta", no_analytic_reason);
      put_null(c, "normal_lower", no_analytic_reason);
      put_null(c, "normal_upper", no_analytic_reason);
    }
    const std::string no_boot = "bootstrap not requested (set --bootstrap)";
    if (boot) {
      const auto k = static_cast<Index>(j);
      put_number(s, "bootstrap", boot->se(k), "bootstrap draws are not finite");
      put_number(c, "percentile_lower", boot->percentile_lower(k), "bootstrap draws are not finite");
      put_number(c, "percentile_upper", boot->percentile_upper(k), "bootstrap draws are not finite");
      put_number(c, "bootstrap_normal_lower", boot->normal_lower(k), "bootstrap draws are not finite");
      put_number(c, "bootstrap_normal_upper", boot->normal_upper(k), "bootstrap draws are not finite");
    } else {
      put_null(s, "bootstrap", no_boot);
      put_null(c, "percentile_lower", no_boot);
      put_null(c, "percentile_upper", no_boot);
    }
    ses.push_back(std::move(s));
    cis.push_back(std::move(c));
  }
  doc["ses"] = std::move(ses);
  doc["cis"] = std::move(cis);
  if (boot) {
    doc["diagnostics"]["bootstrap"] = {{"reps", boot->reps}, {"failed", boot->failed}, {"seed", cfg.seed}};
  }
}

json pretest_json(const AttSeries& series) {
  json p;
  if (series.pre_periods.empty()) {
    put_null(p, "statistic", "no pre-treatment periods beyond the two normalization periods");
    return p;
  }
  if (!series.joint_cov) {
    put_null(p, "statistic", "joint covariance unavailable for this estimator");
    return p;
  }
  const WaldTest w = pretest_wald(series);
  put_number(p, "statistic", w.statistic, "statistic is not finite");
  p["dof"] = w.dof;
  put_number(p, "p_value", w.p_value, "statistic is not finite");
  p["periods"] = series.pre_periods;
  return p;
}

json no_jtest(const std::string& reason) {
  json j;
  put_null(j, "statistic", reason);
  return j;
}

json relevance_json(const RelevanceReport& r) {
  json j;
  j["rank"] = r.rank;
  j["required_rank"] = r.required_rank;
  put_number(j, "condition_number", r.condition_number, "matrix is singular");
  j["instrument_rank"] = r.instrument_rank;
  j["collinear"] = r.collinear;
  put_number(j, "first_stage_f", r.first_stage_f, "first stage is degenerate");
  put_number(j, "first_stage_p", r.first_stage_p, "first stage is degenerate");
  j["rank_deficient"] = r.rank_deficient;
  j["message"] = r.message;
  json coefs = json::array();
  for (const auto& c : r.w_coefficients) {
    json e;
    e["name"] = c.name;
    put_number(e, "estimate", c.estimate, "not estimable");
    put_number(e, "std_error", c.std_error, "not estimable");
    put_number(e, "t_stat", c.t_stat, "not estimable");
    coefs.push_back(std::move(e));
  }
  j["w_coefficients"] = std::move(coefs);
  return j;
}

json base_doc(const RunConfig& cfg, std::string_view estimator) {
  json doc;
  doc["command"] = cfg.command;
  doc["estimator"] = std::string(estimator);
  doc["data"] = cfg.data_path;
  doc["diagnostics"] = json::object();
  return doc;
}

void require_data(const RunConfig& cfg) {
  if (cfg.data_path.empty()) throw Error(ErrorCode::InvalidArgument, "no input file (--data)");
}

int run_estimate(const RunConfig& cfg, std::ostream& out) {
  require_data(cfg);
  const std::string& kind = cfg.data_kind;
  const std::string& est = cfg.estimator;
  const bool boot = cfg.bootstrap_reps > 0;
  if (kind == "panel") {
    const PanelDataset data = load_panel_csv(cfg.data_path, cfg.schema, cfg.t_star);
    EstimatorId id;
    if (est == "ife") {
      id = EstimatorId::IfePanel;
    } else if (auto parsed = parse_estimator_id(est); parsed && *parsed != EstimatorId::IfeRc &&
                                                      *parsed != EstimatorId::T4 &&
                                                      *parsed != EstimatorId::IfePanel) {
      id = *parsed;
    } else {
      throw Error(ErrorCode::SpecMismatch, "estimator '" + est + "' is not available for panel data");
    }
    json doc = base_doc(cfg, to_string(id));
    doc["diagnostics"]["n"] = data.n();
    doc["diagnostics"]["periods"] = data.t_total();
    doc["diagnostics"]["t_star"] = data.t_star;
    AttSeries series;
    ModelSpec spec;
    if (id == EstimatorId::IfePanel) {
      spec = model_spec(cfg, data.covariate_names);
      const PanelFit fit = estimate_gamma1(data, spec);
      series = att_series(fit, data);
      const OverIdReport j = overid_report(fit.gmm);
      doc["j_test"] = {{"statistic", j.j_stat}, {"dof", j.dof}, {"p_value", j.p_value}, {"label", j.label}};
      doc["pretest"] = pretest_json(series);
      json params;
      for (int t = 3; t <= data.t_total(); ++t) {
        json p;
        p["period"] = t;
        put_number(p, "f", fit.params.f_at(t), "not finite");
        std::vector<double> beta(fit.params.beta_at(t).data(),
                                 fit.params.beta_at(t).data() + fit.params.beta_at(t).size());
        p["beta"] = beta;
        params.push_back(std::move(p));
      }
      doc["diagnostics"]["parameters"] = std::move(params);
      doc["diagnostics"]["omega_rank"] = fit.gmm.omega_rank;
      doc["diagnostics"]["relevance"] = relevance_json(check_relevance(data, spec));
    } else {
      series = estimate_att(data, spec, id);
      doc["j_test"] = no_jtest("no over-identifying restrictions for this estimator");
      json p;
      put_null(p, "statistic", "analytic joint covariance unavailable for this estimator");
      doc["pretest"] = std::move(p);
    }
    doc["estimates"] = estimates_json(series, data.period_labels);
    std::optional<BootstrapResult> b;
    if (boot) b = bootstrap_att(data, spec, id, bootstrap_options(cfg));
    inference_json(doc, series, b ? &*b : nullptr, cfg,
                   "no analytic variance for this estimator; use --bootstrap");
    emit_json(doc, cfg, out);
    return 0;
  }
  if (kind == "rc") {
    if (est != "ife" && est != "ife-rc") {
      throw Error(ErrorCode::SpecMismatch, "repeated cross sections support only the ife estimator");
    }
    const RcDataset data = load_rc_csv(cfg.data_path, cfg.schema, cfg.t_star);
    const ModelSpec spec = model_spec(cfg, data.covariate_names);
    const AttSeries series = estimate_att_rc(data, spec);
    json doc = base_doc(cfg, to_string(EstimatorId::IfeRc));
    doc["diagnostics"]["rows"] = data.rows();
    doc["diagnostics"]["periods"] = data.t_total;
    doc["diagnostics"]["t_star"] = data.t_star;
    doc["estimates"] = estimates_json(series, data.period_labels);
    doc["j_test"] = no_jtest("point estimates only for repeated cross sections");
    json p;
    put_null(p, "statistic", "analytic joint covariance unavailable for repeated cross sections");
    doc["pretest"] = std::move(p);
    std::optional<BootstrapResult> b;
    if (boot) b = bootstrap_att(data, spec, bootstrap_options(cfg));
    inference_json(doc, series, b ? &*b : nullptr, cfg,
                   "repeated cross sections use bootstrap standard errors; use --bootstrap");
    emit_json(doc, cfg, out);
    return 0;
  }
  if (kind == "tv") {
    if (est != "t4") throw Error(ErrorCode::SpecMismatch, "time-varying covariate data needs --estimator t4");
    const TvPanelDataset data = load_tv_csv(cfg.data_path, cfg.schema, cfg.t_star);
    const auto fits = estimate_timevarying_all(data);
    const AttSeries series = att_timevarying(data, fits);
    json doc = base_doc(cfg, to_string(EstimatorId::T4));
    doc["diagnostics"]["n"] = data.n();
    doc["diagnostics"]["periods"] = data.t_total();
    json params = json::array();
    for (const auto& f : fits) {
      json p;
      p["period"] = f.t;
      put_number(p, "theta", f.theta, "not finite");
      put_number(p, "f", f.f, "not finite");
      p["beta"] = std::vector<double>(f.beta.data(), f.beta.data() + f.beta.size());
      p["zeta"] = std::vector<double>(f.zeta.data(), f.zeta.data() + f.zeta.size());
      p["zeta_gap"] = std::vector<double>(f.zeta_gap.data(), f.zeta_gap.data() + f.zeta_gap.size());
      params.push_back(std::move(p));
    }
    doc["diagnostics"]["parameters"] = std::move(params);
    doc["estimates"] = estimates_json(series, data.period_labels);
    doc["j_test"] = no_jtest("not computed for this estimator");
    json p;
    put_null(p, "statistic", "analytic joint covariance unavailable for this estimator");
    doc["pretest"] = std::move(p);
    std::optional<BootstrapResult> b;
    if (boot) b = bootstrap_att(data, bootstrap_options(cfg));
    inference_json(doc, series, b ? &*b : nullptr, cfg,
                   "no analytic variance for this estimator; use --bootstrap");
    emit_json(doc, cfg, out);
    return 0;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown data kind '" + kind + "' (panel, rc or tv)");
}

sim::SimConfig parse_cell(const std::string& text, const RunConfig& cfg) {
  sim::SimConfig cell;
  cell.reps = cfg.reps;
  cell.seed = cfg.seed;
  cell.alpha = cfg.alpha;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::InvalidArgument, "bad cell entry '" + item + "'");
    const std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    try {
      if (key == "F3" || key == "f3") {
        cell.f3 = std::stod(value);
      } else if (key == "rho") {
        cell.rho = std::stod(value);
      } else if (key == "n") {
        cell.n = std::stoll(value);
      } else if (key == "alpha") {
        cell.alpha = std::stod(value);
      } else {
        throw Error(ErrorCode::InvalidArgument, "unknown cell key '" + key + "'");
      }
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::InvalidArgument, "bad number in cell entry '" + item + "'");
    }
  }
  return cell;
}

int run_simulate(const RunConfig& cfg, std::ostream& out) {
  std::vector<sim::SimConfig> cells;
  if (cfg.grid_n > 0) {
    cells = sim::table_grid(cfg.grid_n, cfg.reps, cfg.seed);
    for (auto& c : cells) c.alpha = cfg.alpha;
  }
  for (const auto& text : cfg.cells) cells.push_back(parse_cell(text, cfg));
  if (cells.empty()) throw Error(ErrorCode::InvalidArgument, "no cells to simulate (--cell or --grid-n)");
  const sim::SimResult result = sim::run_grid(cells, cfg.threads);
  out << sim::emit_table(result, sim::TableFormat::Text);
  if (!cfg.table_csv.empty()) {
    std::ofstream file(cfg.table_csv);
    if (!file) throw Error(ErrorCode::IoError, "cannot write " + cfg.table_csv);
    file << sim::emit_table(result, sim::TableFormat::Csv);
  }
  if (!cfg.output.empty()) {
    json doc;
    doc["command"] = "simulate";
    doc["seed"] = cfg.seed;
    doc["reps"] = cfg.reps;
    json arr = json::array();
    for (const auto& cell : result.cells) {
      json c;
      c["n"] = cell.n;
      c["f3"] = cell.f3;
      c["rho"] = cell.rho;
      for (auto e : sim::kSimEstimators) {
        const auto& m = cell.at(e);
        json mj;
        put_number(mj, "bias", m.bias, "every replication failed");
        put_number(mj, "rmse", m.rmse, "every replication failed");
        put_number(mj, "mad", m.mad, "every replication failed");
        mj["failed_reps"] = m.failed_reps;
        c[std::string(sim::estimator_name(e))] = std::move(mj);
      }
      arr.push_back(std::move(c));
    }
    doc["cells"] = std::move(arr);
    std::ofstream file(cfg.output);
    if (!file) throw Error(ErrorCode::IoError, "cannot write " + cfg.output);
    file << doc.dump(2) << '\n';
  }
  return 0;
}

int run_event_study(const RunConfig& cfg, std::ostream& out) {
  require_data(cfg);
  const MultiGroupDataset data = load_multigroup_csv(cfg.data_path, cfg.schema);
  EventStudyOptions opts;
  opts.min_group_size = cfg.min_group_size;
  const std::string est = cfg.estimator == "ife" ? "ife-panel" : cfg.estimator;
  const auto id = parse_estimator_id(est);
  if (!id || *id == EstimatorId::IfeRc || *id == EstimatorId::T4) {
    throw Error(ErrorCode::SpecMismatch, "estimator '" + cfg.estimator + "' is not available for event studies");
  }
  opts.estimator = *id;
  ModelSpec spec;
  if (*id == EstimatorId::IfePanel) spec = model_spec(cfg, data.covariate_names);
  const EventStudyResult result = group_time_event_study(data, spec, opts);
  std::optional<BootstrapResult> boot;
  if (cfg.bootstrap_reps > 0) boot = bootstrap_event_study(data, spec, opts, bootstrap_options(cfg));

  json doc = base_doc(cfg, to_string(*id));
  json estimates = json::array();
  json ses = json::array();
  json cis = json::array();
  for (std::size_t j = 0; j < result.event_times.size(); ++j) {
    const auto k = static_cast<Index>(j);
    json e;
    e["event_time"] = result.event_times[j];
    put_number(e, "att", result.att(k), "estimate is not finite");
    json w = json::object();
    for (const auto& [g, weight] : result.weights[j]) w[period_label(data.period_labels, g)] = weight;
    e["weights"] = std::move(w);
    estimates.push_back(std::move(e));
    json s;
    json c;
    s["event_time"] = result.event_times[j];
    c["event_time"] = result.event_times[j];
    if (boot) {
      put_number(s, "bootstrap", boot->se(k), "bootstrap draws are not finite");
      put_number(c, "percentile_lower", boot->percentile_lower(k), "bootstrap draws are not finite");
      put_number(c, "percentile_upper", boot->percentile_upper(k), "bootstrap draws are not finite");
    } else {
      put_null(s, "bootstrap", "bootstrap not requested (set --bootstrap)");
      put_null(c, "percentile_lower", "bootstrap not requested (set --bootstrap)");
      put_null(c, "percentile_upper", "bootstrap not requested (set --bootstrap)");
    }
    ses.push_back(std::move(s));
    cis.push_back(std::move(c));
  }
  doc["estimates"] = std::move(estimates);
  doc["ses"] = std::move(ses);
  doc["cis"] = std::move(cis);
  doc["j_test"] = no_jtest("not reported for aggregated event studies");
  json p;
  put_null(p, "statistic", "not reported for aggregated event studies");
  doc["pretest"] = std::move(p);
  json cohorts = json::array();
  for (const auto& c : result.cohorts) {
    cohorts.push_back({{"group", period_label(data.period_labels, c.group)},
                       {"treated", c.treated},
                       {"estimates", estimates_json(c.series, data.period_labels)}});
  }
  doc["diagnostics"]["cohorts"] = std::move(cohorts);
  if (boot) doc["diagnostics"]["bootstrap"] = {{"reps", boot->reps}, {"failed", boot->failed}};
  emit_json(doc, cfg, out);
  return 0;
}

int run_check_relevance(const RunConfig& cfg, std::ostream& out) {
  require_data(cfg);
  const PanelDataset data = load_panel_csv(cfg.data_path, cfg.schema, cfg.t_star);
  const ModelSpec spec = model_spec(cfg, data.covariate_names);
  const RelevanceReport report = check_relevance(data, spec);
  json doc;
  doc["command"] = "check-relevance";
  doc["data"] = cfg.data_path;
  doc["relevance"] = relevance_json(report);
  emit_json(doc, cfg, out);
  return 0;
}

// Flag values land in a scratch config and are copied over the file config
// only when given on the command line.
struct Bindings {
  RunConfig flags;
  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&, const RunConfig&)>>> items;

  template <typename T>
  void add(CLI::App* app, const std::string& name, T RunConfig::*member, const std::string& desc) {
    CLI::Option* opt = app->add_option(name, flags.*member, desc);
    if constexpr (std::is_same_v<T, std::vector<std::string>>) opt->delimiter(',');
    items.emplace_back(opt, [member](RunConfig& c, const RunConfig& f) { c.*member = f.*member; });
  }

  void add_schema(CLI::App* app, const std::string& name, std::string CsvSchema::*member,
                  const std::string& desc) {
    CLI::Option* opt = app->add_option(name, flags.schema.*member, desc);
    items.emplace_back(opt, [member](RunConfig& c, const RunConfig& f) {
      c.schema.*member = f.schema.*member;
    });
  }

  void apply(RunConfig& cfg) const {
    for (const auto& [opt, copy] : items) {
      if (opt->count() > 0) copy(cfg, flags);
    }
  }
};

void add_data_options(CLI::App* app, Bindings& b) {
  b.add(app, "--data", &RunConfig::data_path, "input CSV file (long format)");
  b.add_schema(app, "--id-col", &CsvSchema::id, "unit id column");
  b.add_schema(app, "--period-col", &CsvSchema::period, "period column (integer labels)");
  b.add_schema(app, "--outcome-col", &CsvSchema::outcome, "outcome column");
  b.add_schema(app, "--treated-col", &CsvSchema::treated, "treatment group column (0/1)");
  CLI::Option* cov = app->add_option("--covariates", b.flags.schema.covariates,
                                     "covariate columns, comma separated")
                         ->delimiter(',');
  b.items.emplace_back(cov, [](RunConfig& c, const RunConfig& f) {
    c.schema.covariates = f.schema.covariates;
  });
  b.add(app, "--x", &RunConfig::x_cols, "covariates with time-varying effects ('const' is the intercept)");
  b.add(app, "--w", &RunConfig::w_cols, "covariates with time-invariant effects");
  b.add(app, "--t-star", &RunConfig::t_star, "first treated period (1-based position)");
  b.add(app, "--estimator", &RunConfig::estimator, "ife, did, lt, t3 or t4");
  b.add(app, "--output", &RunConfig::output, "write the JSON result here instead of stdout");
}

void add_inference_options(CLI::App* app, Bindings& b) {
  b.add(app, "--bootstrap", &RunConfig::bootstrap_reps, "bootstrap replications (0 disables, else >= 100)");
  b.add(app, "--level", &RunConfig::level, "confidence level");
  b.add(app, "--seed", &RunConfig::seed, "root seed");
  b.add(app, "--threads", &RunConfig::threads, "worker threads (0: all)");
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig cfg;
  try {
    read_key(doc, "command", cfg.command);
    read_key(doc, "seed", cfg.seed);
    read_key(doc, "output", cfg.output);
    read_key(doc, "threads", cfg.threads);
    if (doc.contains("data")) {
      read_key(doc["data"], "path", cfg.data_path);
      read_key(doc["data"], "kind", cfg.data_kind);
    }
    if (doc.contains("schema")) {
      const json& s = doc["schema"];
      read_key(s, "id", cfg.schema.id);
      read_key(s, "period", cfg.schema.period);
      read_key(s, "outcome", cfg.schema.outcome);
      read_key(s, "treated", cfg.schema.treated);
      read_key(s, "group", cfg.schema.group);
      read_key(s, "covariates", cfg.schema.covariates);
    }
    if (doc.contains("model")) {
      const json& m = doc["model"];
      read_key(m, "estimator", cfg.estimator);
      read_key(m, "x_cols", cfg.x_cols);
      read_key(m, "w_cols", cfg.w_cols);
      read_key(m, "t_star", cfg.t_star);
    }
    if (doc.contains("inference")) {
      const json& i = doc["inference"];
      read_key(i, "bootstrap_reps", cfg.bootstrap_reps);
      read_key(i, "level", cfg.level);
      read_key(i, "min_group_size", cfg.min_group_size);
    }
    if (doc.contains("simulate")) {
      const json& s = doc["simulate"];
      read_key(s, "cells", cfg.cells);
      read_key(s, "grid_n", cfg.grid_n);
      read_key(s, "reps", cfg.reps);
      read_key(s, "alpha", cfg.alpha);
      read_key(s, "table_csv", cfg.table_csv);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("config has a field of the wrong type: ") + e.what());
  }
  return cfg;
}

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"ATT estimation under interactive fixed effects"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file; flags override its keys");

  Bindings b;
  CLI::App* estimate = app.add_subcommand("estimate", "estimate ATT_t from a CSV file");
  add_data_options(estimate, b);
  add_inference_options(estimate, b);
  b.add(estimate, "--kind", &RunConfig::data_kind, "panel, rc or tv");

  CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo bias/RMSE/MAD tables");
  b.add(simulate, "--cell", &RunConfig::cells, "cell spec such as F3=1,rho=1,n=1000 (repeatable)");
  // A cell spec itself contains commas.
  simulate->get_option("--cell")->delimiter('\0')->allow_extra_args(false);
  b.add(simulate, "--grid-n", &RunConfig::grid_n, "run the full 3 x 3 grid at this n");
  b.add(simulate, "--reps", &RunConfig::reps, "replications per cell");
  b.add(simulate, "--alpha", &RunConfig::alpha, "coefficient on W in untreated outcomes");
  b.add(simulate, "--table-csv", &RunConfig::table_csv, "also write the table as CSV");
  b.add(simulate, "--output", &RunConfig::output, "also write the table as JSON");
  b.add(simulate, "--seed", &RunConfig::seed, "root seed");
  b.add(simulate, "--threads", &RunConfig::threads, "worker threads (0: all)");

  CLI::App* event = app.add_subcommand("event-study", "cohort-by-period effects aggregated by event time");
  add_data_options(event, b);
  add_inference_options(event, b);
  b.add_schema(event, "--group-col", &CsvSchema::group, "first treated period label, 0 for never treated");
  b.add(event, "--min-group-size", &RunConfig::min_group_size, "smallest allowed cohort");

  CLI::App* relevance = app.add_subcommand("check-relevance", "diagnose the instrument relevance condition");
  add_data_options(relevance, b);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw Error(ErrorCode::IoError, "cannot open " + config_path);
      std::stringstream buf;
      buf << in.rdbuf();
      cfg = parse_run_config(buf.str());
    }
    b.apply(cfg);
    CLI::App* chosen = app.get_subcommands().front();
    if (!cfg.command.empty() && cfg.command != chosen->get_name()) {
      throw Error(ErrorCode::InvalidArgument, "config command '" + cfg.command +
                                                  "' does not match subcommand '" + chosen->get_name() + "'");
    }
    cfg.command = chosen->get_name();
    if (cfg.bootstrap_reps != 0 && cfg.bootstrap_reps < 100) {
      throw Error(ErrorCode::InvalidArgument, "--bootstrap needs at least 100 replications");
    }
    if (chosen == estimate) return run_estimate(cfg, out);
    if (chosen == simulate) return run_simulate(cfg, out);
    if (chosen == event) return run_event_study(cfg, out);
    return run_check_relevance(cfg, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return is_validation_error(e.code()) ? 2 : 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace ifeatt::cli
