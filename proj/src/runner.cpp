#include "afr/runner.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cstring>
#include <exception>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

#include "afr/error.hpp"
#include "afr/util.hpp"

namespace afr {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::string_view kRunSchema = "afrbench-run/1";

json counts_to_json(const FeatureCounts& c) {
  json j = json::object();
  for (const auto& [k, v] : c) j[k] = v;
  return j;
}

FeatureCounts counts_from_json(const json& j) {
  FeatureCounts c;
  for (const auto& [k, v] : j.items()) c[k] = v.get<std::int64_t>();
  return c;
}

json prediction_to_json(const ParsedPrediction& p) {
  json features = json::object();
  for (const auto& [id, f] : p.features) features[id] = {{"exists", f.exists}, {"quantity", f.quantity}};
  json unmatched = json::array();
  for (const auto& u : p.unmatched)
    unmatched.push_back({{"feature_name", u.raw_name}, {"exists", u.exists}, {"quantity", u.quantity}});
  return {{"features", std::move(features)}, {"unmatched", std::move(unmatched)}, {"warnings", p.warnings},
          {"raw_json", p.raw_json}};
}

ParsedPrediction prediction_from_json(const json& j) {
  ParsedPrediction p;
  for (const auto& [id, f] : j.at("features").items())
    p.features[id] = {f.at("exists").get<bool>(), f.at("quantity").get<std::int64_t>()};
  for (const auto& u : j.at("unmatched"))
    p.unmatched.push_back(
        {u.at("feature_name").get<std::string>(), u.at("exists").get<bool>(), u.at("quantity").get<std::int64_t>()});
  p.warnings = j.at("warnings").get<std::vector<std::string>>();
  p.raw_json = j.value("raw_json", "");
  return p;
}

json metrics_to_json(const DesignMetrics& m) {
  return {{"fna_pct", m.fna_pct},       {"fqa_pct", m.fqa_pct},     {"hr_pct", m.hr_pct},
          {"mae", m.mae},               {"gt_total", m.gt_total},   {"pred_total", m.pred_total},
          {"tp_qty", m.tp_qty},         {"hallucinated_qty", m.hallucinated_qty},
          {"n_features", m.n_features}, {"parse_status", to_string(m.parse_status)}};
}

DesignMetrics metrics_from_json(const json& j) {
  DesignMetrics m;
  m.fna_pct = j.at("fna_pct").get<double>();
  m.fqa_pct = j.at("fqa_pct").get<double>();
  m.hr_pct = j.at("hr_pct").get<double>();
  m.mae = j.at("mae").get<double>();
  m.gt_total = j.at("gt_total").get<std::int64_t>();
  m.pred_total = j.at("pred_total").get<std::int64_t>();
  m.tp_qty = j.at("tp_qty").get<std::int64_t>();
  m.hallucinated_qty = j.at("hallucinated_qty").get<std::int64_t>();
  m.n_features = j.at("n_features").get<int>();
  m.parse_status = j.at("parse_status").get<std::string>() == "failed" ? ParseStatus::failed : ParseStatus::ok;
  return m;
}

std::vector<ExperimentId> unique_experiments(const std::vector<ExperimentId>& in) {
  std::vector<ExperimentId> out;
  for (auto e : in)
    if (std::find(out.begin(), out.end(), e) == out.end()) out.push_back(e);
  return out;
}

void check_options(const RunOptions& o) {
  if (o.concurrency < 1) throw Error(Errc::invalid_argument, "concurrency must be >= 1");
  if (!(o.failure_threshold_pct >= 0 && o.failure_threshold_pct <= 100))
    throw Error(Errc::invalid_argument, "failure threshold must lie in [0,100]");
  if (o.experiments.empty()) throw Error(Errc::invalid_argument, "no experiments selected");
}

json render_params_json(const RenderParams& p) {
  auto rgb = [](Rgb c) { return json::array({c.r, c.g, c.b}); };
  return {{"width", p.width},
          {"height", p.height},
          {"margin_fraction", p.margin_fraction},
          {"background", rgb(p.background)},
          {"base_color", rgb(p.base_color)},
          {"light_direction", {p.light_direction.x, p.light_direction.y, p.light_direction.z}},
          {"ambient", p.ambient},
          {"edge_overlay", p.edge_overlay},
          {"digest", p.digest()}};
}

// Shared, lazily-filled caches for one run or plan. Thread-safe.
class Preparer {
 public:
  Preparer(const FeatureTaxonomy& t, const RunOptions& opts) : t_(t), opts_(opts) {}

  PromptBundle bundle_for(const DesignRecord& d, ExperimentId e) {
    auto views = views_for(d);
    const auto& spec = experiment_spec(e);
    RenderedViewSet set = *views;
    if (spec.views == ViewMode::single && set.views.size() > 1) set.views.resize(1);
    std::optional<FewShotExample> fewshot;
    if (spec.shots == Shots::few) fewshot = example();
    PromptBundle b = build_prompt(e, t_, set, fewshot, opts_.multi_image_mode);
    b.design_id = d.id;
    return b;
  }

  // Set to write each freshly rendered view under <dir>/views/<design>/.
  std::filesystem::path views_dir;

 private:
  using SetPtr = std::shared_ptr<const RenderedViewSet>;
  using MeshPtr = std::shared_ptr<const TriangleMesh>;

  template <typename V, typename F>
  static V memo(std::mutex& mu, std::map<std::string, std::shared_future<V>>& cache, const std::string& key, F make) {
    std::promise<V> promise;
    std::shared_future<V> fut;
    bool owner = false;
    {
      std::lock_guard lock(mu);
      auto it = cache.find(key);
      if (it == cache.end()) {
        fut = promise.get_future().share();
        cache.emplace(key, fut);
        owner = true;
      } else {
        fut = it->second;
      }
    }
    if (owner) {
      try {
        promise.set_value(make());
      } catch (...) {
        promise.set_exception(std::current_exception());
      }
    }
    return fut.get();
  }

  SetPtr views_for(const DesignRecord& d) {
    if (!d.mesh_path) {
      std::string key = "images:" + d.id;
      return memo<SetPtr>(mu_, sets_, key, [&] {
        std::vector<std::string> names, bytes;
        for (const auto& p : d.view_paths) {
          names.push_back(p.stem().string());
          bytes.push_back(read_file(p));
        }
        auto set = load_view_set(names, bytes);
        for (auto& v : set.views) v.image = Image();
        return std::make_shared<const RenderedViewSet>(std::move(set));
      });
    }
    MeshPtr mesh = memo<MeshPtr>(mu_, meshes_, d.mesh_path->lexically_normal().string(), [&] {
      return std::make_shared<const TriangleMesh>(load_mesh(*d.mesh_path));
    });
    const std::string params = opts_.render.digest();
    return memo<SetPtr>(mu_, sets_, mesh->source_digest + "|" + params, [&] {
      auto set = render_view_set(*mesh, default_views(), opts_.render);
      for (auto& v : set.views) {
        v.image = Image();
        if (!views_dir.empty())
          write_file_atomic(views_dir / sanitize_path_component(d.id) / (v.name + ".png"), v.bytes);
      }
      return std::make_shared<const RenderedViewSet>(std::move(set));
    });
  }

  FewShotExample example() {
    std::call_once(fewshot_once_, [&] {
      try {
        fewshot_ = builtin_fewshot_example(opts_.render);
      } catch (...) {
        fewshot_error_ = std::current_exception();
      }
    });
    if (fewshot_error_) std::rethrow_exception(fewshot_error_);
    return *fewshot_;
  }

  const FeatureTaxonomy& t_;
  const RunOptions& opts_;
  std::mutex mu_;
  std::map<std::string, std::shared_future<MeshPtr>> meshes_;
  std::map<std::string, std::shared_future<SetPtr>> sets_;
  std::once_flag fewshot_once_;
  std::optional<FewShotExample> fewshot_;
  std::exception_ptr fewshot_error_;
};

class RunLock {
 public:
  explicit RunLock(std::filesystem::path path) : path_(std::move(path)) {
    int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
      if (errno == EEXIST)
        throw Error(Errc::run_locked, path_.string() + " exists; another run is using this directory");
      throw Error(Errc::output_dir_not_writable, path_.string() + ": " + std::strerror(errno));
    }
    std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
    ::close(fd);
  }
  ~RunLock() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::filesystem::path path_;
};

void write_json(const std::filesystem::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

void write_index(const std::filesystem::path& dir, const std::vector<UnitResult>& units) {
  json list = json::array();
  std::size_t failed = 0, parse_failed = 0;
  for (const auto& u : units) {
    if (u.status == UnitStatus::failed) ++failed;
    if (u.status == UnitStatus::ok && u.metrics.parse_status == ParseStatus::failed) ++parse_failed;
    list.push_back({{"experiment", u.experiment},
                    {"design_id", u.design_id},
                    {"status", u.status == UnitStatus::ok ? "ok" : "failed"},
                    {"parse_status", u.status == UnitStatus::ok ? to_string(u.metrics.parse_status) : "n/a"},
                    {"error_code", u.error_code},
                    {"path", std::filesystem::relative(unit_result_path(dir, u.experiment, u.design_id), dir)
                                 .generic_string()}});
  }
  write_json(dir / "index.json", {{"n_units", units.size()},
                                  {"n_failed", failed},
                                  {"n_parse_failed", parse_failed},
                                  {"units", std::move(list)}});
}

UnitResult score_reply(UnitResult u, const FeatureTaxonomy& t, MaeMode mode) {
  ParseOutcome po = parse_response(u.raw_text, t);
  u.prediction = po.ok ? po.prediction : ParsedPrediction{};
  u.parse_error = po.ok ? "" : po.error_message;
  u.mae_mode = mode;
  u.metrics = evaluate_design(u.ground_truth, u.prediction, t, mode, po.ok ? ParseStatus::ok : ParseStatus::failed);
  return u;
}

}  // namespace

std::filesystem::path unit_result_path(const std::filesystem::path& run_dir, std::string_view experiment,
                                       std::string_view design_id) {
  return run_dir / std::string(experiment) / (sanitize_path_component(design_id) + ".json");
}

std::size_t WorkManifest::pending_network() const {
  return static_cast<std::size_t>(std::count_if(units.begin(), units.end(), [](const WorkUnit& u) {
    return u.prepare_error.empty() && !u.cached && !u.result_exists;
  }));
}

json UnitResult::to_json(const FeatureTaxonomy& t) const {
  (void)t;
  json j = {{"design_id", design_id},
            {"experiment", experiment},
            {"difficulty", afr::to_string(difficulty)},
            {"model", model},
            {"status", status == UnitStatus::ok ? "ok" : "failed"},
            {"error_code", error_code},
            {"error_message", error_message},
            {"request_digest", request_digest},
            {"from_cache", from_cache},
            {"latency_s", latency_s},
            {"raw_text", raw_text},
            {"ground_truth", counts_to_json(ground_truth)},
            {"mae_mode", afr::to_string(mae_mode)}};
  if (status == UnitStatus::ok) {
    j["prediction"] = prediction_to_json(prediction);
    j["parse_error"] = parse_error;
    j["metrics"] = metrics_to_json(metrics);
  }
  return j;
}

UnitResult UnitResult::from_json(const json& j, const FeatureTaxonomy& t) {
  (void)t;
  try {
    UnitResult u;
    u.design_id = j.at("design_id").get<std::string>();
    u.experiment = j.at("experiment").get<std::string>();
    auto diff = parse_difficulty(j.at("difficulty").get<std::string>());
    if (!diff) throw Error(Errc::malformed_manifest, "unit file has an unknown difficulty");
    u.difficulty = *diff;
    u.model = j.at("model").get<std::string>();
    u.status = j.at("status").get<std::string>() == "ok" ? UnitStatus::ok : UnitStatus::failed;
    u.error_code = j.value("error_code", "");
    u.error_message = j.value("error_message", "");
    u.request_digest = j.value("request_digest", "");
    u.from_cache = j.value("from_cache", false);
    u.latency_s = j.value("latency_s", 0.0);
    u.raw_text = j.value("raw_text", "");
    u.ground_truth = counts_from_json(j.at("ground_truth"));
    u.mae_mode = parse_mae_mode(j.value("mae_mode", "all_leaves"));
    if (u.status == UnitStatus::ok) {
      u.prediction = prediction_from_json(j.at("prediction"));
      u.parse_error = j.value("parse_error", "");
      u.metrics = metrics_from_json(j.at("metrics"));
    }
    return u;
  } catch (const json::exception& e) {
    throw Error(Errc::malformed_manifest, std::string("unit result: ") + e.what());
  }
}

std::vector<ScoredDesign> RunResult::scored() const {
  std::vector<ScoredDesign> out;
  for (const auto& u : units)
    if (u.status == UnitStatus::ok) out.push_back({u.model, u.experiment, u.difficulty, u.design_id, u.metrics});
  return out;
}

std::size_t RunResult::failure_count() const {
  return static_cast<std::size_t>(
      std::count_if(units.begin(), units.end(), [](const UnitResult& u) { return u.status == UnitStatus::failed; }));
}

WorkManifest plan(const Dataset& d, const FeatureTaxonomy& t, const VlmClient& client, const RunOptions& opts) {
  check_options(opts);
  Preparer prep(t, opts);
  WorkManifest m;
  for (const auto& design : d.designs) {
    for (auto e : unique_experiments(opts.experiments)) {
      WorkUnit u;
      u.design_id = design.id;
      u.experiment = e;
      if (!opts.output_dir.empty() && opts.resume) {
        std::error_code ec;
        u.result_exists = std::filesystem::is_regular_file(unit_result_path(opts.output_dir, to_string(e), design.id), ec);
      }
      try {
        u.request_digest = request_digest(client.config(), prep.bundle_for(design, e));
        u.cached = client.is_cached(u.request_digest);
      } catch (const std::exception& ex) {
        u.prepare_error = ex.what();
      }
      m.units.push_back(std::move(u));
    }
  }
  return m;
}

RunResult run(const Dataset& d, const FeatureTaxonomy& t, VlmClient& client, const RunOptions& opts) {
  check_options(opts);
  if (opts.output_dir.empty()) throw Error(Errc::invalid_argument, "output directory is required");
  const auto& dir = opts.output_dir;
  {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir))
      throw Error(Errc::output_dir_not_writable, dir.string() + ": " + ec.message());
  }
  RunLock lock(dir / ".lock");
  const auto experiments = unique_experiments(opts.experiments);

  // Manifest: everything needed to reproduce the run against the same cache.
  ordered_json manifest;
  manifest["schema"] = kRunSchema;
  manifest["code_version"] = version_string();
  manifest["dataset"] = {{"name", d.name}, {"n_designs", d.designs.size()}};
  json ids = json::array();
  for (const auto& design : d.designs) ids.push_back(design.id);
  manifest["designs"] = ids;
  json exps = json::array(), templates = json::object();
  for (auto e : experiments) {
    exps.push_back(to_string(e));
    templates[to_string(e)] = template_digest(e);
  }
  manifest["experiments"] = exps;
  manifest["provider"] = client.config().to_json();
  manifest["taxonomy_version"] = t.version();
  manifest["template_digests"] = templates;
  manifest["render_params"] = render_params_json(opts.render);
  manifest["multi_image_mode"] = to_string(opts.multi_image_mode);
  manifest["mae_mode"] = to_string(opts.mae_mode);
  manifest["failure_threshold_pct"] = opts.failure_threshold_pct;
  manifest["parse_failure_policy"] = "scored as empty prediction";
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");

  struct Slot {
    const DesignRecord* design;
    ExperimentId experiment;
  };
  std::vector<Slot> slots;
  for (const auto& design : d.designs)
    for (auto e : experiments) slots.push_back({&design, e});

  std::vector<std::optional<UnitResult>> results(slots.size());
  if (opts.resume) {
    for (std::size_t i = 0; i < slots.size(); ++i) {
      auto path = unit_result_path(dir, to_string(slots[i].experiment), slots[i].design->id);
      std::error_code ec;
      if (!std::filesystem::is_regular_file(path, ec)) continue;
      json j = json::parse(read_file(path), nullptr, false);
      if (j.is_discarded()) continue;
      try {
        results[i] = UnitResult::from_json(j, t);
      } catch (const Error&) {
        results[i].reset();
      }
    }
  }

  Preparer prep(t, opts);
  prep.views_dir = dir / "views";

  // Refuse early when work remains that no credentials can serve.
  if (!client.has_credentials()) {
    for (std::size_t i = 0; i < slots.size(); ++i) {
      if (results[i]) continue;
      try {
        auto digest = request_digest(client.config(), prep.bundle_for(*slots[i].design, slots[i].experiment));
        if (!client.is_cached(digest))
          throw Error(Errc::provider_unavailable,
                      "no credentials in $" + client.config().api_key_env + " and " + slots[i].design->id + "/" +
                          to_string(slots[i].experiment) + " is not cached");
      } catch (const Error& e) {
        if (e.code() == Errc::provider_unavailable) throw;
      }
    }
  }

  std::mutex progress_mu;
  std::exception_ptr fatal;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < slots.size(); i = next++) {
      if (results[i]) continue;
      const auto& design = *slots[i].design;
      UnitResult u;
      u.design_id = design.id;
      u.experiment = to_string(slots[i].experiment);
      u.difficulty = design.difficulty;
      u.model = client.config().model_id;
      u.ground_truth = design.ground_truth;
      u.mae_mode = opts.mae_mode;
      try {
        PromptBundle bundle = prep.bundle_for(design, slots[i].experiment);
        RawResponse r = client.send(bundle);
        u.request_digest = r.request_digest;
        u.from_cache = r.from_cache;
        u.latency_s = r.latency_s;
        u.raw_text = r.text;
        u = score_reply(std::move(u), t, opts.mae_mode);
      } catch (const Error& e) {
        u.status = UnitStatus::failed;
        u.error_code = std::string(to_string(e.code()));
        u.error_message = e.what();
      } catch (const std::exception& e) {
        u.status = UnitStatus::failed;
        u.error_code = "InternalError";
        u.error_message = e.what();
      }
      try {
        write_json(unit_result_path(dir, u.experiment, u.design_id), u.to_json(t));
      } catch (...) {
        std::lock_guard g(progress_mu);
        if (!fatal) fatal = std::current_exception();
      }
      if (opts.progress) {
        std::lock_guard g(progress_mu);
        opts.progress(u.experiment + " " + u.design_id + " " +
                      (u.status == UnitStatus::ok ? std::string(to_string(u.metrics.parse_status)) : u.error_code));
      }
      results[i] = std::move(u);
    }
  };
  const int n_threads = std::min<int>(opts.concurrency, std::max<int>(1, static_cast<int>(slots.size())));
  std::vector<std::thread> pool;
  for (int k = 0; k < n_threads; ++k) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (fatal) std::rethrow_exception(fatal);

  RunResult rr;
  rr.manifest = json::parse(manifest.dump());
  for (auto& r : results) rr.units.push_back(std::move(*r));
  write_index(dir, rr.units);

  if (!rr.units.empty()) {
    double pct = 100.0 * static_cast<double>(rr.failure_count()) / static_cast<double>(rr.units.size());
    if (pct > opts.failure_threshold_pct)
      throw Error(Errc::too_many_failures, std::to_string(rr.failure_count()) + " of " +
                                               std::to_string(rr.units.size()) + " units failed (" +
                                               format_sig4(pct) + "% > " + format_sig4(opts.failure_threshold_pct) +
                                               "%); results are saved in " + dir.string());
  }
  return rr;
}

RunResult load_run(const std::filesystem::path& run_dir, const FeatureTaxonomy& t) {
  auto mpath = run_dir / "manifest.json";
  std::error_code ec;
  if (!std::filesystem::is_regular_file(mpath, ec))
    throw Error(Errc::manifest_not_found, "no run manifest at " + mpath.string());
  RunResult rr;
  rr.manifest = json::parse(read_file(mpath), nullptr, false);
  if (rr.manifest.is_discarded() || !rr.manifest.is_object() || !rr.manifest.contains("designs") ||
      !rr.manifest.contains("experiments"))
    throw Error(Errc::malformed_manifest, mpath.string() + " is not a run manifest");
  for (const auto& id : rr.manifest["designs"]) {
    for (const auto& e : rr.manifest["experiments"]) {
      auto path = unit_result_path(run_dir, e.get<std::string>(), id.get<std::string>());
      if (!std::filesystem::is_regular_file(path, ec)) continue;
      json j = json::parse(read_file(path), nullptr, false);
      if (j.is_discarded()) throw Error(Errc::malformed_manifest, path.string() + " is not valid JSON");
      rr.units.push_back(UnitResult::from_json(j, t));
    }
  }
  return rr;
}

RunResult rescore(const std::filesystem::path& run_dir, const FeatureTaxonomy& t, MaeMode mode) {
  RunResult rr = load_run(run_dir, t);
  RunLock lock(run_dir / ".lock");
  for (auto& u : rr.units) {
    if (u.status != UnitStatus::ok) continue;
    u = score_reply(std::move(u), t, mode);
    write_json(unit_result_path(run_dir, u.experiment, u.design_id), u.to_json(t));
  }
  rr.manifest["mae_mode"] = to_string(mode);
  auto m = ordered_json::parse(read_file(run_dir / "manifest.json"));
  m["mae_mode"] = to_string(mode);
  write_file_atomic(run_dir / "manifest.json", m.dump(2) + "\n");
  write_index(run_dir, rr.units);
  return rr;
}

}  // namespace afr
