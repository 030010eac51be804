// Command-line front end: corpus construction, evaluation runs against a live
// or mock endpoint, offline rescoring, and a standalone mock server.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "vlmuq/class_map.hpp"
#include "vlmuq/config.hpp"
#include "vlmuq/corpus.hpp"
#include "vlmuq/mockserver.hpp"
#include "vlmuq/report.hpp"
#include "vlmuq/runner.hpp"

namespace {

std::vector<vlmuq::CorruptionKind> parse_kinds(const std::string& csv) {
  std::vector<vlmuq::CorruptionKind> kinds;
  std::string cur;
  for (char c : csv + ",") {
    if (c == ',') {
      std::string t = vlmuq::trim(cur);
      if (!t.empty()) kinds.push_back(vlmuq::corruption_kind_from_name(t));
      cur.clear();
    } else {
      cur += c;
    }
  }
  return kinds;
}

std::vector<int> parse_int_list(const std::string& csv) {
  std::vector<int> out;
  std::string cur;
  for (char c : csv + ",") {
    if (c == ',') {
      std::string t = vlmuq::trim(cur);
      if (!t.empty()) out.push_back(std::stoi(t));
      cur.clear();
    } else {
      cur += c;
    }
  }
  return out;
}

void print_manifest_summary(const vlmuq::Manifest& m, const std::string& out_dir) {
  std::filesystem::path manifest_path = std::filesystem::path(out_dir) / "manifest.jsonl";
  m.save(manifest_path);
  std::cout << "wrote " << m.entries.size() << " samples under " << out_dir << "\n";
  std::cout << "manifest: " << manifest_path.string() << "\n";
}

void print_run_summary(const vlmuq::EvalRun& run) {
  const auto& o = run.outcome;
  std::cout << "records: " << o.records.size() << " total (" << o.new_records
            << " new, " << o.skipped_existing << " already logged)\n";
  std::cout << "network calls: " << o.network_calls << "; hard failures: " << o.failures
            << "\n";
  std::cout << "record log: " << o.records_path.string() << "\n";
  std::cout << "reports: " << run.report_dir.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Black-box evaluation harness for implicit uncertainty in "
               "vision-language models"};
  app.require_subcommand(1);

  // ------------------------------------------------------------- build-corpus
  auto* build = app.add_subcommand("build-corpus", "Construct an evaluation corpus");
  build->require_subcommand(1);

  struct {
    std::string source, out;
    int n_in = 1800, n_anom = 1200;
    uint64_t seed = 7;
  } cifar_args;
  auto* cifar = build->add_subcommand(
      "cifar-vs-not", "Sample in-space photos and out-of-space anomalies from a "
                      "class-indexed image tree");
  cifar->add_option("--source", cifar_args.source, "image tree with numeric class subdirs")
      ->required();
  cifar->add_option("--out", cifar_args.out, "output corpus directory")->required();
  cifar->add_option("--n-in", cifar_args.n_in, "in-space sample count");
  cifar->add_option("--n-anom", cifar_args.n_anom, "anomaly sample count");
  cifar->add_option("--seed", cifar_args.seed, "sampling seed");
  cifar->callback([&] {
    auto m = vlmuq::build_cifar_vs_not(cifar_args.source,
                                       vlmuq::ClassMap::default_cifar_imagenet(), cifar_args.n_in,
                                       cifar_args.n_anom, cifar_args.seed, cifar_args.out);
    print_manifest_summary(m, cifar_args.out);
  });

  struct {
    std::string normal, abnormal, out, params;
    int n_each = 500;
    uint64_t seed = 7;
  } ecg_args;
  auto* ecg = build->add_subcommand(
      "ecg", "Sample normal/abnormal signal images and synthesize matched anomaly traces");
  ecg->add_option("--normal", ecg_args.normal, "directory of normal signal images")
      ->required();
  ecg->add_option("--abnormal", ecg_args.abnormal, "directory of abnormal signal images")
      ->required();
  ecg->add_option("--out", ecg_args.out, "output corpus directory")->required();
  ecg->add_option("--n-each", ecg_args.n_each, "samples per group");
  ecg->add_option("--seed", ecg_args.seed, "sampling/synthesis seed");
  ecg->add_option("--params", ecg_args.params, "JSON file overriding synthesis geometry");
  ecg->callback([&] {
    vlmuq::CorpusParams p;
    if (!ecg_args.params.empty()) p = vlmuq::load_corpus_params(ecg_args.params);
    auto m = vlmuq::build_ecg_corpus(ecg_args.normal, ecg_args.abnormal, ecg_args.n_each,
                                     ecg_args.seed, ecg_args.out, p.ecg);
    print_manifest_summary(m, ecg_args.out);
  });

  struct {
    std::string source, out, params;
    std::string kinds = "gaussian_noise,defocus_blur,pixelate";
    std::string severities = "1,2,3,4,5";
    int n = 1000;
    uint64_t seed = 7;
  } grid_args;
  auto* grid = build->add_subcommand(
      "corruption-grid", "Cross in-space images with corruption kinds and severities");
  grid->add_option("--source", grid_args.source, "image tree with numeric class subdirs")
      ->required();
  grid->add_option("--out", grid_args.out, "output corpus directory")->required();
  grid->add_option("--n", grid_args.n, "number of source images");
  grid->add_option("--seed", grid_args.seed, "sampling seed");
  grid->add_option("--kinds", grid_args.kinds, "comma-separated corruption kinds");
  grid->add_option("--severities", grid_args.severities, "comma-separated severities 1-5");
  grid->add_option("--params", grid_args.params, "JSON file overriding severity tables");
  grid->callback([&] {
    vlmuq::CorpusParams p;
    if (!grid_args.params.empty()) p = vlmuq::load_corpus_params(grid_args.params);
    auto m = vlmuq::build_corruption_grid(
        grid_args.source, vlmuq::ClassMap::default_cifar_imagenet(), grid_args.n,
        parse_kinds(grid_args.kinds), parse_int_list(grid_args.severities),
        grid_args.seed, grid_args.out, p.tables);
    print_manifest_summary(m, grid_args.out);
  });

  struct {
    std::string metadata, images, out;
    int n = 1000;
    uint64_t seed = 7;
  } gal_args;
  auto* gal = build->add_subcommand(
      "galaxy", "Ingest galaxy images with vote-based ambiguity bins from a metadata CSV");
  gal->add_option("--metadata", gal_args.metadata, "CSV of id,leaf_prob,label")->required();
  gal->add_option("--images", gal_args.images, "directory holding <id>.png files")
      ->required();
  gal->add_option("--out", gal_args.out, "output corpus directory")->required();
  gal->add_option("--n", gal_args.n, "number of samples");
  gal->add_option("--seed", gal_args.seed, "sampling seed");
  gal->callback([&] {
    auto m = vlmuq::ingest_galaxy(gal_args.metadata, gal_args.images, gal_args.n,
                                  gal_args.seed, gal_args.out);
    print_manifest_summary(m, gal_args.out);
  });

  // ----------------------------------------------------------------------- run
  struct {
    std::string config, task, mock_script;
    bool mock = false;
    bool resume = false;
  } run_args;
  auto* run_cmd = app.add_subcommand("run", "Execute an evaluation run");
  run_cmd->add_option("--config", run_args.config, "run configuration JSON")->required();
  run_cmd
      ->add_option("--task", run_args.task,
                   "one of: anomaly, classification, caption")
      ->required();
  run_cmd->add_flag("--mock", run_args.mock,
                    "serve an in-process scripted endpoint instead of the configured one");
  run_cmd->add_option("--mock-script", run_args.mock_script,
                      "mock behavior script (default: truth oracle)");
  run_cmd->add_flag("--resume", run_args.resume, "continue an interrupted run");
  run_cmd->callback([&] {
    vlmuq::RunConfig cfg = vlmuq::load_run_config(run_args.config);
    if (run_args.resume) cfg.resume = true;

    std::optional<vlmuq::MockServer> server;
    if (run_args.mock) {
      vlmuq::MockScript script = run_args.mock_script.empty()
                                     ? vlmuq::MockScript::oracle()
                                     : vlmuq::MockScript::from_file(run_args.mock_script);
      server.emplace(std::move(script));
      server->start();
      cfg.endpoint.base_url = server->base_url();
      cfg.endpoint.is_mock = true;
      cfg.endpoint.tag_requests = true;
      cfg.endpoint.api_key_env.clear();
      std::cout << "mock endpoint at " << server->base_url() << "\n";
    }

    vlmuq::EvalRun run;
    if (run_args.task == "anomaly")
      run = vlmuq::run_anomaly(cfg);
    else if (run_args.task == "classification")
      run = vlmuq::run_classification(cfg);
    else if (run_args.task == "caption")
      run = vlmuq::run_caption_diversity(cfg);
    else
      throw vlmuq::ValidationError("unknown task '" + run_args.task +
                                   "' (expected anomaly, classification, or caption)");
    print_run_summary(run);
  });

  // -------------------------------------------------------------------- report
  struct {
    std::string records, manifest, out, kind, scores, cls_log;
  } rep_args;
  auto* rep = app.add_subcommand("report", "Rescore an existing record log offline");
  rep->add_option("--records", rep_args.records, "records.jsonl from a run")->required();
  rep->add_option("--manifest", rep_args.manifest, "corpus manifest")->required();
  rep->add_option("--out", rep_args.out, "report output directory")->required();
  rep->add_option("--kind", rep_args.kind, "anomaly, classification, or caption")
      ->required();
  rep->add_option("--scores", rep_args.scores,
                  "diversity_scores.jsonl (caption reports only)");
  rep->add_option("--classification-log", rep_args.cls_log,
                  "records.jsonl of a classification run for the diversity split");
  rep->callback([&] {
    namespace fs = std::filesystem;
    auto manifest = vlmuq::Manifest::load(rep_args.manifest);
    auto records = vlmuq::RecordLog::load(rep_args.records);
    vlmuq::Provenance prov;
    prov.config_digest = "offline-rescore";
    prov.catalog_fingerprint = records.empty() ? "" : records.front().catalog_fingerprint;
    prov.manifest_digest = vlmuq::sha256_file(rep_args.manifest);
    prov.generated_at = vlmuq::utc_timestamp();
    fs::create_directories(rep_args.out);
    fs::path out(rep_args.out);

    if (rep_args.kind == "anomaly") {
      auto grouped = vlmuq::join_records(records, manifest);
      auto report = vlmuq::anomaly_report_json(grouped, manifest, prov);
      vlmuq::atomic_write_file(out / "anomaly_report.json", report.dump(2) + "\n");
      vlmuq::write_anomaly_csv(out / "anomaly_report.csv", grouped);
    } else if (rep_args.kind == "classification") {
      auto grouped = vlmuq::join_records(records, manifest);
      bool galaxy = !manifest.entries.empty() &&
                    manifest.entries.front().task == vlmuq::TaskKind::kGalaxyReject;
      auto key = galaxy ? vlmuq::GroupKey::kAmbiguityBin : vlmuq::GroupKey::kSeverity;
      auto report = vlmuq::selective_report_json(grouped, key, prov);
      vlmuq::atomic_write_file(out / "selective_report.json", report.dump(2) + "\n");
      vlmuq::write_selective_csv(out / "selective_report.csv", grouped, key);
      vlmuq::write_selective_svg(out / "selective_report.svg", grouped, key,
                                 "Selective classification");
    } else if (rep_args.kind == "caption") {
      if (rep_args.scores.empty())
        throw vlmuq::ValidationError("caption reports need --scores");
      auto scores = vlmuq::load_diversity_scores(rep_args.scores);
      std::vector<vlmuq::QueryRecord> cls;
      if (!rep_args.cls_log.empty()) cls = vlmuq::RecordLog::load(rep_args.cls_log);
      bool galaxy = !manifest.entries.empty() &&
                    manifest.entries.front().task == vlmuq::TaskKind::kGalaxyReject;
      auto key = galaxy ? vlmuq::GroupKey::kAmbiguityBin : vlmuq::GroupKey::kSeverity;
      auto report = vlmuq::diversity_report_json(scores, manifest, cls, key, prov);
      vlmuq::atomic_write_file(out / "diversity_report.json", report.dump(2) + "\n");
      vlmuq::write_diversity_csv(out / "diversity_report.csv", report);
      vlmuq::write_diversity_svg(out / "diversity_report.svg", report,
                                 "Caption diversity");
    } else {
      throw vlmuq::ValidationError("unknown report kind '" + rep_args.kind + "'");
    }
    std::cout << "reports written to " << rep_args.out << "\n";
  });

  // ---------------------------------------------------------------- mock-serve
  struct {
    std::string script;
    int port = 8900;
  } serve_args;
  auto* serve = app.add_subcommand("mock-serve", "Run the scripted endpoint standalone");
  serve->add_option("--script", serve_args.script, "mock behavior script (default oracle)");
  serve->add_option("--port", serve_args.port, "listen port (0 = ephemeral)");
  serve->callback([&] {
    vlmuq::MockScript script = serve_args.script.empty()
                                   ? vlmuq::MockScript::oracle()
                                   : vlmuq::MockScript::from_file(serve_args.script);
    vlmuq::MockServer server(std::move(script));
    server.start(serve_args.port);
    std::cout << "mock endpoint listening at " << server.base_url() << std::endl;
    for (;;) std::this_thread::sleep_for(std::chrono::hours(1));
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const vlmuq::BudgetRefusal& e) {
    std::cerr << "refused: " << e.what() << "\n";
    return 3;
  } catch (const vlmuq::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
