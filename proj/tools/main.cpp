#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "poroscale/pipeline.hpp"

using namespace poroscale;
namespace fs = std::filesystem;

namespace {

// exit-code contract: 0 success, 2 parameter/classification, 3 I/O,
// 4 solver/kernel, 5 internal assertion
template <class Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    return 0;
  } catch (const ParameterError& e) {
    std::cerr << "parameter error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 3;
  } catch (const SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 5;
  }
}

struct CommonOpts {
  std::string config;
  std::string out_dir;
  int threads = 0;
  std::uint64_t seed = 0;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config, "pipeline config (JSON)")->required();
  cmd->add_option("--out", o.out_dir, "output directory");
  cmd->add_option("--threads", o.threads, "worker threads for independent cell solves");
  cmd->add_option("--seed", o.seed, "seed for randomized test-geometry generators");
}

PipelineConfig load(const CommonOpts& o) {
  int threads = o.threads;
  if (threads == 0) {
    if (const char* env = std::getenv("POROSCALE_THREADS")) threads = std::atoi(env);
  }
  auto cfg = load_pipeline_config(o.config, o.out_dir, threads, o.seed);
  fs::create_directories(cfg.out_dir);
  return cfg;
}

void write_doc(const std::string& path, const json& doc,
               std::vector<std::pair<std::string, std::uint64_t>>& outputs) {
  std::uint64_t h = write_text_file(path, doc.dump(2) + "\n");
  outputs.emplace_back(fs::path(path).filename().string(), h);
}

void print_report(const VerificationReport& rep) {
  for (const auto& c : rep.checks)
    std::cout << (c.pass ? "[PASS] " : "[FAIL] ") << c.name
              << (c.detail.empty() ? "" : ": " + c.detail) << "\n";
  for (const auto& n : rep.notes) std::cout << "note: " << n << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"poroscale: periodic-cell upscaling for thermo-poroelastic media"};
  app.require_subcommand(1);

  CommonOpts classify_o, upscale_o, run_o, verify_o;
  auto* c_classify = app.add_subcommand("classify", "select the homogenized model");
  add_common(c_classify, classify_o);
  auto* c_upscale =
      app.add_subcommand("upscale", "solve cell problems and assemble coefficients");
  add_common(c_upscale, upscale_o);
  auto* c_run = app.add_subcommand("run", "time-step the homogenized macroscopic system");
  add_common(c_run, run_o);
  auto* c_verify = app.add_subcommand("verify", "check structural tensor properties");
  add_common(c_verify, verify_o);
  std::string verify_coeff_file;
  c_verify->add_option("--coefficients", verify_coeff_file,
                       "previously written coefficients document");

  CLI11_PARSE(app, argc, argv);

  if (c_classify->parsed())
    return guarded([&] {
      auto cfg = load(classify_o);
      auto conn = connectivity(cfg.geometry);
      auto sel = classify(cfg.limits, conn, cfg.hyp);
      std::cout << model_name(sel.model) << "\n";
      if (sel.darcy_variant != DarcyVariant::NotApplicable)
        std::cout << "darcy: " << darcy_variant_name(sel.darcy_variant) << "\n";
      for (const auto& s : sel.renormalization_trail)
        std::cout << "renormalized via " << renorm_map_name(s.map) << " (fields scaled by "
                  << s.field_scale << ")\n";
      std::vector<std::pair<std::string, std::uint64_t>> outputs;
      write_doc((fs::path(cfg.out_dir) / "selection.json").string(), to_json(sel), outputs);
      write_doc((fs::path(cfg.out_dir) / "classify_manifest.json").string(),
                make_manifest(cfg, outputs), outputs);
    });

  if (c_upscale->parsed())
    return guarded([&] {
      auto cfg = load(upscale_o);
      auto res = run_upscale(cfg);
      std::cout << model_name(res.selection.model) << "\n";
      print_report(res.report);
      std::vector<std::pair<std::string, std::uint64_t>> outputs;
      write_doc((fs::path(cfg.out_dir) / "coefficients.json").string(),
                upscale_document(cfg, res), outputs);
      write_doc((fs::path(cfg.out_dir) / "upscale_manifest.json").string(),
                make_manifest(cfg, outputs, res.coeffs.notes), outputs);
    });

  if (c_run->parsed())
    return guarded([&] {
      auto cfg = load(run_o);
      auto up = run_upscale(cfg);
      auto art = run_macro(cfg, up);
      std::vector<std::pair<std::string, std::uint64_t>> outputs;
      for (const auto& [name, content] : art.csv_files) {
        auto path = (fs::path(cfg.out_dir) / (name + ".csv")).string();
        std::uint64_t h = write_text_file(path, content);
        outputs.emplace_back(name + ".csv", h);
      }
      write_doc((fs::path(cfg.out_dir) / "coefficients.json").string(),
                upscale_document(cfg, up), outputs);
      json manifest = make_manifest(cfg, outputs, art.trajectory.notes,
                                    art.trajectory.energy);
      write_doc((fs::path(cfg.out_dir) / "run_manifest.json").string(), manifest, outputs);
      std::cout << "run complete: " << art.trajectory.times.size() << " stored samples\n";
    });

  if (c_verify->parsed())
    return guarded([&] {
      auto cfg = load(verify_o);
      VerificationReport rep;
      if (!verify_coeff_file.empty()) {
        json doc = detail::read_json_file(verify_coeff_file);
        auto coeffs = coefficients_from_json(doc.at("coefficients"));
        MemoryKernelSet kern;
        bool has_k = doc.contains("kernels");
        if (has_k) kern = kernels_from_json(doc.at("kernels"), coeffs.dim);
        auto conn = connectivity(cfg.geometry);
        rep = verify_coefficients(coeffs, has_k ? &kern : nullptr, &conn);
      } else {
        rep = run_upscale(cfg).report;
      }
      print_report(rep);
      if (!rep.all_pass) throw SolverError("verification checks failed");
    });

  return 0;
}
