#include "afr/cli.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <sstream>

#include "afr/assets.hpp"
#include "afr/dataset.hpp"
#include "afr/error.hpp"
#include "afr/metrics.hpp"
#include "afr/prompt.hpp"
#include "afr/render.hpp"
#include "afr/report.hpp"
#include "afr/runner.hpp"
#include "afr/taxonomy.hpp"
#include "afr/util.hpp"
#include "afr/vlm_client.hpp"

namespace afr {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

int exit_code_for(Errc c) {
  switch (category_of(c)) {
    case ErrorCategory::usage:
      return kExitUsage;
    case ErrorCategory::data:
      return kExitData;
    case ErrorCategory::provider:
      return kExitProvider;
    case ErrorCategory::threshold:
      return kExitThreshold;
  }
  return kExitData;
}

std::vector<std::string> split_list(const std::vector<std::string>& raw) {
  std::vector<std::string> out;
  for (const auto& item : raw) {
    std::stringstream ss(item);
    std::string part;
    while (std::getline(ss, part, ','))
      if (!trim(part).empty()) out.push_back(trim(part));
  }
  return out;
}

std::vector<ExperimentId> parse_experiments(const std::vector<std::string>& raw) {
  std::vector<ExperimentId> out;
  for (const auto& s : split_list(raw)) out.push_back(parse_experiment(s));
  if (out.empty()) throw Error(Errc::invalid_argument, "no experiments given");
  return out;
}

struct TaxonomyArgs {
  std::string file, aliases;

  FeatureTaxonomy load() const {
    if (file.empty()) return builtin_taxonomy();
    std::optional<std::filesystem::path> a;
    if (!aliases.empty()) a = aliases;
    return load_taxonomy(file, a);
  }
};

void add_taxonomy_flags(CLI::App* cmd, TaxonomyArgs& a) {
  cmd->add_option("--taxonomy", a.file, "Feature list JSON to use instead of the built-in one");
  cmd->add_option("--aliases", a.aliases, "Alias table for --taxonomy");
}

struct RenderArgs {
  int width = 1024, height = 1024;
  bool edges = false;

  RenderParams params() const {
    RenderParams p;
    p.width = width;
    p.height = height;
    p.edge_overlay = edges;
    return p;
  }
};

void add_render_flags(CLI::App* cmd, RenderArgs& a) {
  cmd->add_option("--width", a.width, "Image width in pixels (>= 64)")->capture_default_str();
  cmd->add_option("--height", a.height, "Image height in pixels (>= 64)")->capture_default_str();
  cmd->add_flag("--edges", a.edges, "Overlay outline edges on the shaded render");
}

struct ProviderArgs {
  std::string provider, mock, cache, fallback = "error";
};

void add_provider_flags(CLI::App* cmd, ProviderArgs& a) {
  cmd->add_option("--provider", a.provider, "Provider config JSON (kind, model_id, api_key_env, ...)");
  cmd->add_option("--mock", a.mock, "Directory of scripted replies; replaces network calls");
  cmd->add_option("--mock-fallback", a.fallback, "Reply when no script matches: error | empty")
      ->capture_default_str();
  cmd->add_option("--cache", a.cache, "Response cache directory (default: <out>/cache)");
}

VlmClient make_client(const ProviderArgs& a, const std::filesystem::path& out_dir) {
  ProviderConfig cfg;
  if (!a.provider.empty()) {
    cfg = load_provider_config(a.provider);
  } else if (a.mock.empty()) {
    throw Error(Errc::invalid_argument, "either --provider or --mock is required");
  }
  std::optional<MockProvider> mock;
  if (!a.mock.empty()) {
    MockFallback fb;
    if (a.fallback == "error") {
      fb = MockFallback::error;
    } else if (a.fallback == "empty") {
      fb = MockFallback::empty;
    } else {
      throw Error(Errc::invalid_argument, "--mock-fallback must be error or empty");
    }
    if (!std::filesystem::is_directory(a.mock))
      throw Error(Errc::invalid_argument, "--mock directory " + a.mock + " does not exist");
    mock = mock_provider(a.mock, fb);
  }
  std::filesystem::path cache = a.cache.empty() ? out_dir / "cache" : std::filesystem::path(a.cache);
  return VlmClient(cfg, cache, nullptr, mock);
}

Dataset load_dataset(const std::string& manifest, const FeatureTaxonomy& t, const std::string& difficulty) {
  Dataset d = load_manifest(manifest, t);
  if (!difficulty.empty()) {
    auto level = parse_difficulty(difficulty);
    if (!level) throw Error(Errc::invalid_argument, "--difficulty must be easy, medium or hard");
    d = filter_by_difficulty(d, *level);
  }
  return d;
}

void print_aggregate_table(std::ostream& out, const std::vector<AggregateMetrics>& rows) {
  char line[256];
  std::snprintf(line, sizeof line, "%-24s %-4s %-7s %4s %8s %8s %8s %8s %6s\n", "model", "exp", "tier", "n", "FNA%",
                "FQA%", "HR%", "MAE", "parse!");
  out << line;
  for (const auto& a : rows) {
    std::snprintf(line, sizeof line, "%-24s %-4s %-7s %4d %8s %8s %8s %8s %6d\n", a.model.c_str(),
                  a.experiment.c_str(), a.difficulty.c_str(), a.n_designs, format_sig4(a.fna_pct).c_str(),
                  format_sig4(a.fqa_pct).c_str(), format_sig4(a.hr_pct).c_str(), format_sig4(a.mae).c_str(),
                  a.n_parse_failures);
    out << line;
  }
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Evaluate vision-language models on CAD manufacturing feature recognition.", "afrbench"};
  app.set_version_flag("--version", std::string(version_string()));
  app.require_subcommand(1);

  // taxonomy show
  auto* tax = app.add_subcommand("taxonomy", "Inspect the manufacturing feature list");
  tax->require_subcommand(1);
  auto* tax_show = tax->add_subcommand("show", "Print the feature list and its canonical ids");
  bool tax_json = false;
  TaxonomyArgs tax_args;
  tax_show->add_flag("--json", tax_json, "Machine-readable output");
  add_taxonomy_flags(tax_show, tax_args);

  // validate
  auto* val = app.add_subcommand("validate", "Check a dataset manifest and its referenced files");
  std::string val_manifest;
  bool val_json = false;
  TaxonomyArgs val_tax;
  val->add_option("--manifest", val_manifest, "Dataset manifest JSON")->required();
  val->add_flag("--json", val_json, "Machine-readable output");
  add_taxonomy_flags(val, val_tax);

  // render
  auto* ren = app.add_subcommand("render", "Render a mesh to view images");
  std::string ren_mesh, ren_out, ren_montage;
  std::vector<std::string> ren_views{"iso,iso2,top"};
  RenderArgs ren_args;
  ren->add_option("--mesh", ren_mesh, "STL or OBJ file")->required();
  ren->add_option("--views", ren_views, "Comma-separated views: iso, iso2, top, bottom, front, back, left, right")
      ->capture_default_str();
  ren->add_option("--out", ren_out, "Output directory for <view>.png")->required();
  ren->add_option("--montage", ren_montage, "Also write montage.png: horizontal | grid");
  add_render_flags(ren, ren_args);

  // prompt build
  auto* pr = app.add_subcommand("prompt", "Work with experiment prompts");
  pr->require_subcommand(1);
  auto* pr_build = pr->add_subcommand("build", "Print the text prompt for an experiment");
  std::string pr_exp, pr_out;
  bool pr_fewshot = false;
  TaxonomyArgs pr_tax;
  pr_build->add_option("--experiment", pr_exp, "Experiment number 1-6")->required();
  pr_build->add_flag("--fewshot", pr_fewshot, "Append the few-shot example answer block (experiments 4 and 6)");
  pr_build->add_option("--out", pr_out, "Write to this file instead of stdout");
  add_taxonomy_flags(pr_build, pr_tax);

  // run / plan share most flags
  struct RunArgs {
    std::string manifest, out, difficulty, multi_image = "separate", mae_mode = "all_leaves";
    std::vector<std::string> experiments{"1,2,3,4,5,6"};
    int concurrency = 4;
    double threshold = 20.0;
    bool resume = false, quiet = false, json = false;
    ProviderArgs provider;
    RenderArgs render;
    TaxonomyArgs tax;
  };
  RunArgs ra, pa;
  auto add_run_flags = [](CLI::App* cmd, RunArgs& a) {
    cmd->add_option("--manifest", a.manifest, "Dataset manifest JSON")->required();
    cmd->add_option("--experiments", a.experiments, "Comma-separated experiment numbers 1-6")->capture_default_str();
    cmd->add_option("--out", a.out, "Run directory")->required();
    cmd->add_option("--difficulty", a.difficulty, "Restrict to one tier: easy | medium | hard");
    cmd->add_option("--multi-image", a.multi_image, "Multi-view delivery: separate | montage")->capture_default_str();
    cmd->add_option("--concurrency", a.concurrency, "Worker threads")->capture_default_str();
    cmd->add_flag("--resume", a.resume, "Skip units whose result file already exists");
    add_provider_flags(cmd, a.provider);
    add_render_flags(cmd, a.render);
    add_taxonomy_flags(cmd, a.tax);
  };
  auto* run_cmd = app.add_subcommand("run", "Render, prompt, query, parse and score a dataset");
  add_run_flags(run_cmd, ra);
  run_cmd->add_option("--mae-mode", ra.mae_mode, "MAE denominator: all_leaves | union")->capture_default_str();
  run_cmd->add_option("--failure-threshold", ra.threshold, "Max share of failed units in percent")
      ->capture_default_str();
  run_cmd->add_flag("--quiet", ra.quiet, "No per-unit progress on stderr");
  auto* plan_cmd = app.add_subcommand("plan", "List work units and how many need provider calls");
  add_run_flags(plan_cmd, pa);
  plan_cmd->add_flag("--json", pa.json, "Machine-readable output");

  // score
  auto* sc = app.add_subcommand("score", "Re-parse stored replies and recompute metrics");
  std::string sc_run, sc_mode = "all_leaves";
  bool sc_json = false;
  TaxonomyArgs sc_tax;
  sc->add_option("--run", sc_run, "Run directory")->required();
  sc->add_option("--mae-mode", sc_mode, "MAE denominator: all_leaves | union")->capture_default_str();
  sc->add_flag("--json", sc_json, "Print the aggregate table as JSON");
  add_taxonomy_flags(sc, sc_tax);

  // report
  auto* rep = app.add_subcommand("report", "Write CSV/JSON tables and optional SVG charts");
  std::vector<std::string> rep_runs;
  std::string rep_out;
  bool rep_charts = false;
  TaxonomyArgs rep_tax;
  rep->add_option("--run", rep_runs, "Run directory (repeat to compare models)")->required();
  rep->add_option("--out", rep_out, "Report directory")->required();
  rep->add_flag("--charts", rep_charts, "Also write fna/fqa/hr/mae SVG charts");
  add_taxonomy_flags(rep, rep_tax);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (tax_show->parsed()) {
      FeatureTaxonomy t = tax_args.load();
      if (tax_json) {
        ordered_json leaves = ordered_json::array();
        for (const auto& l : t.leaves())
          leaves.push_back({{"id", l.id},
                            {"display_name", l.display_name},
                            {"category_path", l.category_path},
                            {"aliases", l.aliases}});
        ordered_json doc{{"version", t.version()}, {"leaves", leaves}, {"tree", t.tree()}};
        out << doc.dump(2) << "\n";
      } else {
        out << t.serialize();
        out << "\n# " << t.leaves().size() << " leaf features, version " << t.version() << "\n";
        for (const auto& l : t.leaves()) out << "#   " << l.id << "\t" << l.display_name << "\n";
      }
      return kExitOk;
    }

    if (val->parsed()) {
      FeatureTaxonomy t = val_tax.load();
      Dataset d = load_manifest(val_manifest, t);
      ValidationReport r = validate(d);
      if (val_json) {
        json issues = json::array();
        for (const auto& i : r.issues)
          issues.push_back({{"design_id", i.design_id},
                            {"kind", to_string(i.kind)},
                            {"severity", i.severity == Severity::error ? "error" : "warning"},
                            {"detail", i.detail}});
        out << json{{"dataset", d.name}, {"n_designs", d.designs.size()}, {"issues", issues}}.dump(2) << "\n";
      } else {
        out << d.name << ": " << d.designs.size() << " designs, " << r.issues.size() << " issue(s)\n";
        for (const auto& i : r.issues)
          out << (i.severity == Severity::error ? "error   " : "warning ") << to_string(i.kind) << " "
              << i.design_id << ": " << i.detail << "\n";
      }
      return r.has_errors() ? kExitData : kExitOk;
    }

    if (ren->parsed()) {
      std::vector<ViewSpec> views;
      for (const auto& n : split_list(ren_views)) views.push_back(view_by_name(n));
      std::optional<MontageLayout> layout;
      if (ren_montage == "horizontal") {
        layout = MontageLayout::horizontal;
      } else if (ren_montage == "grid") {
        layout = MontageLayout::grid;
      } else if (!ren_montage.empty()) {
        throw Error(Errc::invalid_argument, "--montage must be horizontal or grid");
      }
      TriangleMesh mesh = load_mesh(ren_mesh);
      auto set = render_view_set(mesh, views, ren_args.params());
      for (const auto& v : set.views) {
        auto path = std::filesystem::path(ren_out) / (v.name + ".png");
        write_file_atomic(path, v.bytes);
        out << path.string() << "\n";
      }
      if (layout) {
        auto path = std::filesystem::path(ren_out) / "montage.png";
        write_file_atomic(path, compose_montage(set, *layout));
        out << path.string() << "\n";
      }
      if (mesh.dropped_degenerate > 0) err << "note: dropped " << mesh.dropped_degenerate << " degenerate triangles\n";
      return kExitOk;
    }

    if (pr_build->parsed()) {
      ExperimentId id = parse_experiment(pr_exp);
      std::string text = build_prompt_text(id, pr_tax.load());
      if (pr_fewshot) {
        if (experiment_spec(id).shots != Shots::few)
          throw Error(Errc::invalid_argument, "--fewshot applies to experiments 4 and 6 only");
        text += "\n\n" + std::string(kExampleAnswerLabel) + std::string(embedded_asset("fewshot/answer.json"));
      }
      if (pr_out.empty()) {
        out << text;
      } else {
        write_file_atomic(pr_out, text);
      }
      return kExitOk;
    }

    auto make_opts = [](const RunArgs& a) {
      RunOptions o;
      o.experiments = parse_experiments(a.experiments);
      o.concurrency = a.concurrency;
      o.failure_threshold_pct = a.threshold;
      o.resume = a.resume;
      o.multi_image_mode = parse_multi_image_mode(a.multi_image);
      o.mae_mode = parse_mae_mode(a.mae_mode);
      o.output_dir = a.out;
      o.render = a.render.params();
      return o;
    };

    if (plan_cmd->parsed()) {
      FeatureTaxonomy t = pa.tax.load();
      RunOptions o = make_opts(pa);
      Dataset d = load_dataset(pa.manifest, t, pa.difficulty);
      VlmClient client = make_client(pa.provider, o.output_dir);
      WorkManifest m = plan(d, t, client, o);
      std::size_t errors = 0, cached = 0;
      for (const auto& u : m.units) {
        if (!u.prepare_error.empty()) ++errors;
        if (u.cached) ++cached;
      }
      if (pa.json) {
        json units = json::array();
        for (const auto& u : m.units)
          units.push_back({{"design_id", u.design_id},
                           {"experiment", to_string(u.experiment)},
                           {"request_digest", u.request_digest},
                           {"cached", u.cached},
                           {"result_exists", u.result_exists},
                           {"prepare_error", u.prepare_error}});
        out << json{{"n_units", m.units.size()},
                    {"pending_network", m.pending_network()},
                    {"cached", cached},
                    {"prepare_errors", errors},
                    {"units", units}}
                   .dump(2)
            << "\n";
      } else {
        out << m.units.size() << " units, " << cached << " cached, " << m.pending_network()
            << " pending provider calls, " << errors << " cannot be prepared\n";
        for (const auto& u : m.units)
          if (!u.prepare_error.empty()) out << "  " << to_string(u.experiment) << " " << u.design_id << ": "
                                            << u.prepare_error << "\n";
      }
      return kExitOk;
    }

    if (run_cmd->parsed()) {
      FeatureTaxonomy t = ra.tax.load();
      RunOptions o = make_opts(ra);
      if (!ra.quiet) o.progress = [&err](const std::string& line) { err << line << "\n"; };
      Dataset d = load_dataset(ra.manifest, t, ra.difficulty);
      VlmClient client = make_client(ra.provider, o.output_dir);
      RunResult r = run(d, t, client, o);
      std::size_t parse_failed = 0;
      for (const auto& u : r.units)
        if (u.status == UnitStatus::ok && u.metrics.parse_status == ParseStatus::failed) ++parse_failed;
      out << r.units.size() << " units: " << r.failure_count() << " failed, " << parse_failed
          << " unparseable replies; " << client.provider_calls() << " provider calls, " << client.cache_hits()
          << " cache hits\n";
      auto scored = r.scored();
      if (!scored.empty()) print_aggregate_table(out, aggregate(scored));
      out << "results: " << o.output_dir.string() << "\n";
      return kExitOk;
    }

    if (sc->parsed()) {
      FeatureTaxonomy t = sc_tax.load();
      RunResult r = rescore(sc_run, t, parse_mae_mode(sc_mode));
      auto scored = r.scored();
      if (scored.empty()) throw Error(Errc::invalid_argument, "run has no scored units");
      auto rows = aggregate(scored);
      if (sc_json) {
        out << aggregate_json(rows, provenance_for({r}));
      } else {
        print_aggregate_table(out, rows);
      }
      return kExitOk;
    }

    if (rep->parsed()) {
      FeatureTaxonomy t = rep_tax.load();
      std::vector<RunResult> runs;
      for (const auto& dir : rep_runs) runs.push_back(load_run(dir, t));
      std::vector<ScoredDesign> scored;
      for (const auto& r : runs) {
        auto s = r.scored();
        scored.insert(scored.end(), s.begin(), s.end());
      }
      if (scored.empty()) throw Error(Errc::invalid_argument, "no scored results to report");
      auto paths = write_tables(runs, rep_out);
      if (rep_charts) {
        auto charts = emit_charts(aggregate(scored), rep_out, provenance_for(runs));
        paths.insert(paths.end(), charts.begin(), charts.end());
      }
      for (const auto& p : paths) out << p.string() << "\n";
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "afrbench: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "afrbench: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace afr
