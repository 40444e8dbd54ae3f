// vigil: hallucination detection for image recontextualization.
//
//   vigil run       --dataset DIR --config cfg.json --backend URL|replay:DIR --out DIR
//   vigil stats     --dataset DIR
//   vigil evaluate  --reports DIR --dataset DIR [--category NAME] --out metrics.json
//   vigil judge     --reports DIR --dataset DIR --backend URL|replay:DIR --out judged.json
//   vigil calibrate --scores table.csv --heldout CATEGORY
//   vigil calibrate --dataset DIR --backend URL --grid grid.json --out table.csv
//
// Exit codes: 0 success, 2 config/schema error, 3 backend unreachable,
// 4 some samples failed.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vigil/vigil.hpp"

namespace fs = std::filesystem;
using vigil::ojson;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitUnreachable = 3;
constexpr int kExitPartial = 4;

void write_json(const fs::path& path, const ojson& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw vigil::ConfigError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

vigil::Dataset load_checked(const fs::path& dir, bool verify_images) {
  auto ds = vigil::load_dataset(dir, {.verify_images = verify_images});
  for (const auto& r : ds.rejected)
    std::cerr << "warning: manifest record " << r.index << (r.id.empty() ? "" : " (" + r.id + ")")
              << " rejected: " << r.reason << "\n";
  return ds;
}

struct RunArgs {
  std::string dataset, config, backend, out, record;
  bool baseline = false;
  unsigned workers = 1;
};

int cmd_run(const RunArgs& a) {
  const auto cfg = a.config.empty() ? vigil::PipelineConfig{} : vigil::load_pipeline_config(a.config);
  if (a.baseline) cfg.validate_for_baseline();
  const auto ds = load_checked(a.dataset, true);
  auto transport = vigil::make_transport(a.backend);
  if (!a.record.empty()) transport = std::make_shared<vigil::RecordingTransport>(transport, a.record);
  const vigil::ModelClient client(transport, cfg.embed_dim);

  fs::create_directories(a.out);
  const auto t0 = std::chrono::steady_clock::now();
  const auto outcomes = vigil::run_samples(ds.samples, cfg, client, {.baseline = a.baseline, .workers = a.workers});
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::size_t ok = 0, skipped = 0, failed = 0, transport_failed = 0;
  ojson samples = ojson::array();
  for (const auto& o : outcomes) {
    if (o.report) vigil::write_report(*o.report, a.out);
    ojson e = {{"sample_id", o.sample_id}, {"status", std::string(vigil::to_string(o.status))}, {"seconds", o.seconds}};
    if (!o.error.empty()) e["error"] = o.error;
    if (!o.raw_response.empty()) e["raw_response"] = o.raw_response;
    samples.push_back(std::move(e));
    switch (o.status) {
      case vigil::SampleStatus::ok: ++ok; break;
      case vigil::SampleStatus::skipped: ++skipped; break;
      case vigil::SampleStatus::failed:
        ++failed;
        if (o.transport_failure) ++transport_failed;
        std::cerr << "sample " << o.sample_id << " failed: " << o.error << "\n";
        break;
    }
  }
  write_json(fs::path(a.out) / "run_summary.json",
             {{"mode", a.baseline ? "baseline" : "pipeline"},
              {"backend", client.identity()},
              {"total", outcomes.size()},
              {"succeeded", ok},
              {"skipped", skipped},
              {"failed", failed},
              {"rejected_manifest_records", ds.rejected.size()},
              {"elapsed_seconds", elapsed},
              {"workers", a.workers},
              {"samples", samples}});
  std::cerr << ok << " ok, " << skipped << " skipped, " << failed << " failed\n";
  if (failed > 0 && transport_failed == failed && ok == 0) return kExitUnreachable;
  if (failed > 0) return kExitPartial;
  return kExitOk;
}

int cmd_stats(const std::string& dataset) {
  const auto ds = load_checked(dataset, false);
  std::cout << vigil::to_json(vigil::dataset_stats(ds)).dump(2) << "\n";
  return kExitOk;
}

// Reports keyed by dataset order; samples without a report are listed.
struct LoadedReports {
  std::vector<const vigil::Sample*> samples;
  std::vector<vigil::HallucinationAnnotation> predicted;
  std::vector<std::string> missing;
};

LoadedReports load_reports(const vigil::Dataset& ds, const fs::path& dir, std::optional<vigil::ProductCategory> only) {
  LoadedReports lr;
  for (const auto& s : ds.samples) {
    if (only && s.category != *only) continue;
    const auto path = dir / vigil::report_filename(s.id);
    std::ifstream in(path);
    if (!in) {
      lr.missing.push_back(s.id);
      continue;
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw vigil::ValidationError(path.string() + ": " + e.what());
    }
    try {
      auto a = vigil::validate_report(j);
      if (j["sample_id"].get<std::string>() != s.id) throw vigil::ValidationError("sample_id does not match file name");
      lr.samples.push_back(&s);
      lr.predicted.push_back(std::move(a));
    } catch (const vigil::ValidationError& e) {
      throw vigil::ValidationError(path.string() + ": " + e.what());
    }
  }
  return lr;
}

int cmd_evaluate(const std::string& reports, const std::string& dataset, const std::string& category,
                 const std::string& out) {
  std::optional<vigil::ProductCategory> only;
  if (!category.empty()) only = vigil::require_product_category(category);
  const auto ds = load_checked(dataset, false);
  const auto lr = load_reports(ds, reports, only);
  std::vector<vigil::LabelVector> p, t;
  for (std::size_t i = 0; i < lr.samples.size(); ++i) {
    p.push_back(vigil::binarize(lr.predicted[i]));
    t.push_back(vigil::binarize(lr.samples[i]->annotation));
  }
  const auto f1 = vigil::multilabel_f1(p, t);
  write_json(out, {{"category", only ? ojson(std::string(vigil::to_string(*only))) : ojson(nullptr)},
                   {"samples_scored", lr.samples.size()},
                   {"missing_reports", lr.missing},
                   {"multilabel", vigil::to_json(f1)}});
  std::cout << "macro F1 " << f1.macro_f1 << " over " << lr.samples.size() << " samples\n";
  return kExitOk;
}

int cmd_judge(const std::string& reports, const std::string& dataset, const std::string& backend,
              const std::string& out) {
  const auto ds = load_checked(dataset, false);
  const auto lr = load_reports(ds, reports, std::nullopt);
  const vigil::ModelClient client(vigil::make_transport(backend));
  std::vector<std::pair<vigil::HallucinationCategory, vigil::JudgeCounts>> counts;
  ojson per_sample = ojson::array();
  for (std::size_t i = 0; i < lr.samples.size(); ++i)
    for (auto c : vigil::kDetectedCategories) {
      const auto& pred = lr.predicted[i][c];
      const auto& truth = lr.samples[i]->annotation[c];
      // Two empty descriptions share no defects; no call needed.
      const auto jc = pred.empty() && truth.empty() ? vigil::JudgeCounts{} : client.judge(pred, truth);
      counts.emplace_back(c, jc);
      per_sample.push_back({{"sample_id", lr.samples[i]->id},
                            {"category", std::string(vigil::to_string(c))},
                            {"tp", jc.tp},
                            {"fp", jc.fp},
                            {"fn", jc.fn}});
    }
  const auto agg = vigil::aggregate_judge(counts);
  write_json(out, {{"backend", client.identity()},
                   {"samples_judged", lr.samples.size()},
                   {"missing_reports", lr.missing},
                   {"per_sample", per_sample},
                   {"aggregate", vigil::to_json(agg)}});
  std::cout << "judge macro F1 " << agg.macro_f1 << "\n";
  return kExitOk;
}

struct CalibrateArgs {
  std::string scores, heldout, dataset, backend, grid, out, config;
  unsigned workers = 1;
};

int cmd_calibrate(const CalibrateArgs& a) {
  if (!a.scores.empty()) {
    const auto table = vigil::load_score_table(a.scores);
    std::vector<vigil::ProductCategory> cats;
    if (a.heldout.empty())
      cats.assign(vigil::kAllProductCategories.begin(), vigil::kAllProductCategories.end());
    else
      cats.push_back(vigil::require_product_category(a.heldout));
    ojson result = ojson::array();
    for (auto c : cats) {
      const auto sel = vigil::select_best(table, c);
      result.push_back({{"heldout", std::string(vigil::to_string(c))},
                        {"tau", sel.config.tau},
                        {"delta", sel.config.delta},
                        {"boxes", sel.config.boxes},
                        {"score", sel.score}});
    }
    std::cout << (a.heldout.empty() ? result : result[0]).dump(2) << "\n";
    return kExitOk;
  }
  if (a.dataset.empty() || a.backend.empty() || a.out.empty())
    throw vigil::ConfigError("calibrate needs either --scores, or --dataset, --backend and --out");
  vigil::GridAxes axes;
  if (!a.grid.empty()) {
    std::ifstream in(a.grid);
    if (!in) throw vigil::ConfigError("cannot open grid file: " + a.grid);
    try {
      axes = vigil::parse_grid_axes(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
      throw vigil::ConfigError("grid file is not valid JSON: " + std::string(e.what()));
    }
  }
  const auto grid = vigil::expand_grid(axes);
  const auto base = a.config.empty() ? vigil::PipelineConfig{} : vigil::load_pipeline_config(a.config);
  const auto ds = load_checked(a.dataset, true);
  auto cache = std::make_shared<vigil::CachingTransport>(vigil::make_transport(a.backend));
  const vigil::ModelClient client(cache, base.embed_dim);
  const auto table = vigil::grid_search(ds, grid, client, vigil::macro_f1_evaluator, base, a.workers);
  std::ofstream(a.out) << vigil::format_score_table(table);
  std::cerr << grid.size() << " grid points, " << cache->misses() << " backend calls, " << cache->hits()
            << " cache hits\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hallucination detection for image recontextualization"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run the detection pipeline (or the zero-shot baseline) on a dataset");
  run_cmd->add_option("--dataset", run.dataset, "Dataset directory containing manifest.json")->required();
  run_cmd->add_option("--config", run.config, "Pipeline config JSON");
  run_cmd->add_option("--backend", run.backend, "http://host:port or replay:DIR")->required();
  run_cmd->add_option("--out", run.out, "Output directory for reports")->required();
  run_cmd->add_flag("--baseline", run.baseline, "Single zero-shot inspector call per sample");
  run_cmd->add_option("--workers", run.workers, "Samples processed concurrently")->check(CLI::Range(1u, 256u));
  run_cmd->add_option("--record", run.record, "Also write every backend response as a replay fixture into DIR");

  std::string stats_dataset;
  auto* stats_cmd = app.add_subcommand("stats", "Print dataset composition statistics as JSON");
  stats_cmd->add_option("--dataset", stats_dataset, "Dataset directory")->required();

  std::string ev_reports, ev_dataset, ev_category, ev_out;
  auto* eval_cmd = app.add_subcommand("evaluate", "Multi-label F1 of reports against ground truth");
  eval_cmd->add_option("--reports", ev_reports, "Directory of <id>.report.json files")->required();
  eval_cmd->add_option("--dataset", ev_dataset, "Dataset directory")->required();
  eval_cmd->add_option("--category", ev_category, "Restrict to one product category");
  eval_cmd->add_option("--out", ev_out, "Metrics JSON output")->required();

  std::string jd_reports, jd_dataset, jd_backend, jd_out;
  auto* judge_cmd = app.add_subcommand("judge", "Defect-level judge scoring of reports");
  judge_cmd->add_option("--reports", jd_reports, "Directory of <id>.report.json files")->required();
  judge_cmd->add_option("--dataset", jd_dataset, "Dataset directory")->required();
  judge_cmd->add_option("--backend", jd_backend, "http://host:port or replay:DIR")->required();
  judge_cmd->add_option("--out", jd_out, "Judge results JSON output")->required();

  CalibrateArgs cal;
  auto* cal_cmd = app.add_subcommand("calibrate", "Leave-one-category-out configuration selection");
  cal_cmd->add_option("--scores", cal.scores, "Score table CSV (selection only)");
  cal_cmd->add_option("--heldout", cal.heldout, "Held-out category (all five when omitted)");
  cal_cmd->add_option("--dataset", cal.dataset, "Dataset directory (compute path)");
  cal_cmd->add_option("--backend", cal.backend, "http://host:port or replay:DIR (compute path)");
  cal_cmd->add_option("--grid", cal.grid, "Grid JSON {\"tau\":[..],\"delta\":[..],\"boxes\":[..]}");
  cal_cmd->add_option("--config", cal.config, "Base pipeline config JSON");
  cal_cmd->add_option("--out", cal.out, "Score table CSV output (compute path)");
  cal_cmd->add_option("--workers", cal.workers, "Samples processed concurrently")->check(CLI::Range(1u, 256u));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*stats_cmd) return cmd_stats(stats_dataset);
    if (*eval_cmd) return cmd_evaluate(ev_reports, ev_dataset, ev_category, ev_out);
    if (*judge_cmd) return cmd_judge(jd_reports, jd_dataset, jd_backend, jd_out);
    if (*cal_cmd) return cmd_calibrate(cal);
  } catch (const vigil::TransportError& e) {
    std::cerr << "error: backend unreachable: " << e.what() << "\n";
    return kExitUnreachable;
  } catch (const vigil::PartialTableError& e) {
    std::cerr << "error: " << e.what() << "\n";
    for (const auto& m : e.missing_cells()) std::cerr << "  missing: " << m << "\n";
    return kExitPartial;
  } catch (const vigil::ProtocolError& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (!e.raw().empty()) std::cerr << "raw response: " << e.raw() << "\n";
    return kExitPartial;
  } catch (const vigil::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}
