#include "cpfos/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <iostream>
#include <optional>
#include <sstream>

#include "cpfos/basis.hpp"
#include "cpfos/io.hpp"
#include "cpfos/rank_cv.hpp"
#include "cpfos/simbas.hpp"
#include "cpfos/synth.hpp"

namespace cpfos {

namespace {

namespace fs = std::filesystem;

// ---- shared option groups ----

struct DataOptions {
  std::string data;
  std::string volumes;
  std::string covariates;
  std::string subject_ids;
  bool no_intercept = false;

  void add(CLI::App& app, bool with_covariates) {
    auto* d = app.add_option("--data", data, "Order-4 tensor file (p1 x p2 x p3 x subjects)");
    auto* v = app.add_option("--volumes", volumes, "Text file listing one NIfTI-1 volume per subject");
    d->excludes(v);
    if (!with_covariates) return;
    app.add_option("--covariates", covariates, "Covariate CSV (subject_id first)")->required();
    app.add_option("--subject-ids", subject_ids, "Subject ids in tensor order, one per line");
    app.add_flag("--no-intercept", no_intercept, "Do not prepend an intercept column");
  }

  Tensor load_tensor() const {
    if (data.empty() == volumes.empty()) throw InvalidArgument("exactly one of --data or --volumes is required");
    Tensor y = data.empty() ? io::read_volume_stack(io::read_path_list(volumes)) : io::read_tensor(data);
    if (y.order() != 4)
      throw InvalidData("input must be an order-4 tensor, got dims " + dims_string(y.dims()));
    return y;
  }

  io::CovariateTable load_covariates(Index subjects) const {
    io::CovariateOptions opts;
    opts.add_intercept = !no_intercept;
    opts.expected_rows = subjects;
    if (!subject_ids.empty()) {
      const std::string text = io::read_file(subject_ids);
      std::istringstream lines(text);
      for (std::string line; std::getline(lines, line);) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        opts.subject_order.push_back(line.substr(first, line.find_last_not_of(" \t\r") - first + 1));
      }
    }
    return io::read_covariates(covariates, opts);
  }
};

struct AlsOptions {
  int max_iters = 500;
  double tol = 1e-8;
  std::string init = "hosvd";

  void add(CLI::App& app) {
    app.add_option("--max-iters", max_iters, "ALS sweep limit")->capture_default_str();
    app.add_option("--tol", tol, "ALS relative convergence tolerance")->capture_default_str();
    app.add_option("--init", init, "ALS initialization")
        ->check(CLI::IsMember({"hosvd", "random"}))
        ->capture_default_str();
  }

  AlsConfig config(std::uint64_t seed) const {
    AlsConfig c;
    c.max_iters = max_iters;
    c.tol = tol;
    c.init = init == "random" ? AlsConfig::Init::RandomUniform : AlsConfig::Init::Hosvd;
    c.seed = seed;
    return c;
  }
};

struct SamplerOptions {
  ChainSettings chain;
  PriorSettings prior;

  void add(CLI::App& app) {
    app.add_option("--draws", chain.n_total, "Total sampler iterations")->capture_default_str();
    app.add_option("--burn-in", chain.burn_in, "Discarded initial iterations")->capture_default_str();
    app.add_option("--thin", chain.thin, "Keep every thin-th iteration")->capture_default_str();
    app.add_option("--prior-precision", prior.precision, "L0 = precision * I")->capture_default_str();
    app.add_option("--prior-scale", prior.scale, "V0 = scale * I")->capture_default_str();
    app.add_option("--prior-dof-offset", prior.dof_offset, "nu0 = R + offset")->capture_default_str();
  }
};

struct CvOptions {
  std::vector<Index> ranks;
  int folds = 10;

  void add(CLI::App& app) {
    app.add_option("--ranks", ranks, "Candidate ranks, comma separated")->delimiter(',');
    app.add_option("--folds", folds, "Cross-validation folds")->capture_default_str();
  }
};

// Seeds for the independent random stages of one run.
enum Stream : std::uint64_t { kAlsStream = 1, kChainStream = 2, kCvStream = 3 };

// ---- helpers ----

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  for (std::string part; std::getline(ss, part, sep);) parts.push_back(part);
  return parts;
}

double to_double(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  while (used < s.size() && std::isspace(static_cast<unsigned char>(s[used]))) ++used;
  if (used == 0 || used != s.size()) throw InvalidArgument(what + ": '" + s + "' is not a number");
  return v;
}

Matrix parse_gamma(const std::string& text, Index p, Index rank) {
  const auto rows = split(text, ';');
  if (static_cast<Index>(rows.size()) != p)
    throw InvalidArgument("--gamma needs " + std::to_string(p) + " ';'-separated rows, got " +
                          std::to_string(rows.size()));
  Matrix g(p, rank);
  for (Index i = 0; i < p; ++i) {
    const auto cells = split(rows[static_cast<std::size_t>(i)], ',');
    if (static_cast<Index>(cells.size()) != rank)
      throw InvalidArgument("--gamma row " + std::to_string(i + 1) + " needs " + std::to_string(rank) + " values");
    for (Index r = 0; r < rank; ++r) g(i, r) = to_double(cells[static_cast<std::size_t>(r)], "--gamma");
  }
  return g;
}

CovariateKind parse_kind(const std::string& s) {
  if (s == "intercept") return CovariateKind::Intercept;
  if (s == "binary") return CovariateKind::Binary;
  if (s == "continuous") return CovariateKind::Continuous;
  throw InvalidArgument("unknown design column kind '" + s + "' (intercept, binary, continuous)");
}

ContrastSpec parse_contrast(const std::string& text, const std::vector<std::string>& columns, Index p) {
  for (std::size_t j = 0; j < columns.size(); ++j)
    if (columns[j] == text) return ContrastSpec::select(p, static_cast<Index>(j), text);
  if (text.find(',') == std::string::npos && text.find_first_of("0123456789") == std::string::npos) {
    std::string known;
    for (const auto& c : columns) known += (known.empty() ? "" : ", ") + c;
    throw InvalidArgument("unknown contrast '" + text + "'; design columns are: " + known);
  }
  const auto cells = split(text, ',');
  if (static_cast<Index>(cells.size()) != p)
    throw InvalidArgument("contrast weights need " + std::to_string(p) + " entries, got " +
                          std::to_string(cells.size()));
  Vector w(p);
  for (Index j = 0; j < p; ++j) w[j] = to_double(cells[static_cast<std::size_t>(j)], "--contrast");
  return ContrastSpec(w, text);
}

Tensor mask_to_tensor(const VoxelMask& m, const SpatialDims& dims) {
  return to_volume(m.cast<double>().matrix(), dims);
}

std::string join_names(const std::vector<std::string>& names) {
  std::string out;
  for (const auto& n : names) out += (out.empty() ? "" : ",") + n;
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Expands "--config FILE" into "--key=value" arguments placed before the user's
// own arguments; keys also given on the command line are skipped so flags win.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  if (args.empty()) return args;
  std::vector<std::string> user;
  std::string config_path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw CLI::ArgumentMismatch("--config requires a file path");
      config_path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    } else {
      user.push_back(args[i]);
    }
  }
  std::vector<std::string> out{args.front()};
  if (!config_path.empty()) {
    for (const auto& [key, value] : io::read_key_values(config_path)) {
      const std::string flag = "--" + key;
      bool given = false;
      for (const auto& u : user) given = given || u == flag || u.rfind(flag + "=", 0) == 0;
      if (!given) out.push_back(flag + "=" + value);
    }
  }
  out.insert(out.end(), user.begin(), user.end());
  return out;
}

// ---- subcommands ----

struct SimulateCmd {
  std::string out_dir;
  std::vector<Index> dims{8, 8, 8};
  Index subjects = 40;
  Index rank = 3;
  std::vector<std::string> design{"intercept", "binary"};
  std::string gamma;
  double noise_subject = 0, noise_voxel = 0;
  std::uint64_t seed = 0;

  void add(CLI::App& app) {
    app.add_option("--out", out_dir, "Output directory")->required();
    app.add_option("--dims", dims, "Spatial dims p1,p2,p3")->delimiter(',')->expected(3);
    app.add_option("--subjects", subjects, "Number of subjects")->capture_default_str();
    app.add_option("--rank", rank, "True CP rank")->capture_default_str();
    app.add_option("--design", design, "Design columns: intercept, binary, continuous")->delimiter(',');
    app.add_option("--gamma", gamma, "True basis coefficients, rows ';'-separated (default: intercept row of ones)");
    app.add_option("--noise-subject", noise_subject, "Basis-space noise sd")->capture_default_str();
    app.add_option("--noise-voxel", noise_voxel, "Voxel-space noise sd")->capture_default_str();
    app.add_option("--seed", seed, "Random seed")->capture_default_str();
  }

  void run(std::ostream& out) const {
    SynthSpec spec;
    spec.spatial_dims = {dims[0], dims[1], dims[2]};
    spec.subjects = subjects;
    spec.rank = rank;
    spec.design.clear();
    for (const auto& d : design) spec.design.push_back(parse_kind(d));
    const Index p = static_cast<Index>(spec.design.size());
    if (gamma.empty()) {
      spec.gamma_star = Matrix::Zero(p, rank);
      spec.gamma_star.row(0).setOnes();
    } else {
      spec.gamma_star = parse_gamma(gamma, p, rank);
    }
    spec.noise_subject_sd = noise_subject;
    spec.noise_voxel_sd = noise_voxel;
    spec.seed = seed;
    const SynthData d = generate(spec);

    const fs::path dir(out_dir);
    io::write_tensor(dir / "data.tnsr", d.y);
    std::vector<std::string> ids;
    for (Index i = 0; i < subjects; ++i) {
      std::string id = std::to_string(i + 1);
      ids.push_back("sub-" + std::string(id.size() < 4 ? 4 - id.size() : 0, '0') + id);
    }
    std::vector<Index> keep;
    std::vector<std::string> kept_names;
    for (Index j = 0; j < p; ++j)
      if (spec.design[static_cast<std::size_t>(j)] != CovariateKind::Intercept) {
        keep.push_back(j);
        kept_names.push_back(d.column_names[static_cast<std::size_t>(j)]);
      }
    Matrix cols(subjects, static_cast<Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j) cols.col(static_cast<Index>(j)) = d.z.col(keep[j]);
    io::write_covariates(dir / "covariates.csv", ids, cols, kept_names);

    const fs::path truth = dir / "truth";
    io::write_tensor(truth / "lambda.tnsr", io::vector_to_tensor(d.truth.lambda));
    for (int n = 0; n < 3; ++n)
      io::write_tensor(truth / ("factor_" + std::to_string(n + 1) + ".tnsr"),
                       io::matrix_to_tensor(d.truth.spatial_factors[static_cast<std::size_t>(n)]));
    io::write_tensor(truth / "gamma_star.tnsr", io::matrix_to_tensor(d.truth.gamma_star));
    io::write_tensor(truth / "g.tnsr", io::matrix_to_tensor(d.truth.g));
    io::write_tensor(truth / "loading.tnsr", io::matrix_to_tensor(d.truth.loading));
    const Matrix maps = d.truth.gamma();
    for (Index j = 0; j < p; ++j)
      io::write_tensor(truth / ("map_" + d.column_names[static_cast<std::size_t>(j)] + ".tnsr"),
                       to_volume(maps.row(j).transpose(), spec.spatial_dims));
    io::write_key_values(truth / "truth.txt", {{"columns", join_names(d.column_names)},
                                               {"rank", std::to_string(rank)},
                                               {"seed", std::to_string(seed)},
                                               {"noise_subject_sd", io::format_double(noise_subject)},
                                               {"noise_voxel_sd", io::format_double(noise_voxel)}});
    out << "simulated " << dims_string(d.y.dims()) << " tensor with design [" << join_names(d.column_names)
        << "] into " << dir.string() << "\n";
  }
};

struct DecomposeCmd {
  DataOptions data;
  AlsOptions als;
  Index rank = 0;
  std::uint64_t seed = 0;
  std::string out_dir;

  void add(CLI::App& app) {
    data.add(app, false);
    als.add(app);
    app.add_option("--rank", rank, "CP rank")->required()->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "Random seed")->capture_default_str();
    app.add_option("--out", out_dir, "Model output directory")->required();
  }

  void run(std::ostream& out) const {
    const Tensor y = data.load_tensor();
    const auto t0 = std::chrono::steady_clock::now();
    const CpModel model = cp_als(y, rank, als.config(Rng::derive_seed(seed, kAlsStream)));
    io::write_model(out_dir, model);
    out << "rank " << rank << " CP fit: relative error " << io::format_double(model.fit) << " after "
        << model.iterations << " sweeps" << (model.converged ? "" : " (not converged)") << ", "
        << seconds_since(t0) << " s\n";
  }
};

struct RankCvCmd {
  DataOptions data;
  AlsOptions als;
  SamplerOptions sampler;
  CvOptions cv;
  std::uint64_t seed = 0;
  int threads = 0;
  std::string out_file;

  void add(CLI::App& app) {
    data.add(app, true);
    als.add(app);
    sampler.add(app);
    cv.add(app);
    app.get_option("--ranks")->required();
    app.add_option("--seed", seed, "Random seed")->capture_default_str();
    app.add_option("--threads", threads, "Worker threads (0 = all cores)")->capture_default_str();
    app.add_option("--out", out_file, "Rank table CSV")->required();
  }

  void run(std::ostream& out) const {
    const Tensor y = data.load_tensor();
    const io::CovariateTable cov = data.load_covariates(y.dim(3));
    CvConfig cfg;
    cfg.folds = cv.folds;
    cfg.ranks = cv.ranks;
    cfg.seed = Rng::derive_seed(seed, kCvStream);
    cfg.als = als.config(0);
    cfg.prior = sampler.prior;
    cfg.chain = sampler.chain;
    cfg.threads = threads;
    const CvResult res = cv_rank_search(y, cov.z, cfg);
    io::write_rank_table(out_file, res);
    for (std::size_t r = 0; r < res.ranks.size(); ++r)
      out << "rank " << res.ranks[r] << ": mean CV error " << io::format_double(res.per_rank_error[static_cast<Index>(r)])
          << "\n";
    out << "selected rank " << res.selected_rank << "\n";
  }
};

struct FitCmd {
  DataOptions data;
  AlsOptions als;
  SamplerOptions sampler;
  CvOptions cv;
  Index rank = 0;
  bool use_cv = false;
  std::uint64_t seed = 0;
  int threads = 0;
  std::string out_dir;

  void add(CLI::App& app) {
    data.add(app, true);
    als.add(app);
    sampler.add(app);
    cv.add(app);
    auto* r = app.add_option("--rank", rank, "CP rank")->check(CLI::PositiveNumber);
    auto* c = app.add_flag("--cv", use_cv, "Select the rank by cross-validation over --ranks");
    r->excludes(c);
    app.add_option("--seed", seed, "Random seed")->capture_default_str();
    app.add_option("--threads", threads, "Worker threads for --cv (0 = all cores)")->capture_default_str();
    app.add_option("--out", out_dir, "Output directory")->required();
  }

  void run(std::ostream& out) const {
    if ((rank > 0) == use_cv) throw InvalidArgument("fit needs exactly one of --rank or --cv");
    if (use_cv && cv.ranks.empty()) throw InvalidArgument("--cv needs --ranks");
    const auto t0 = std::chrono::steady_clock::now();
    const Tensor y = data.load_tensor();
    const io::CovariateTable cov = data.load_covariates(y.dim(3));
    const fs::path dir(out_dir);

    Index chosen = rank;
    if (use_cv) {
      CvConfig cfg;
      cfg.folds = cv.folds;
      cfg.ranks = cv.ranks;
      cfg.seed = Rng::derive_seed(seed, kCvStream);
      cfg.als = als.config(0);
      cfg.prior = sampler.prior;
      cfg.chain = sampler.chain;
      cfg.threads = threads;
      const CvResult res = cv_rank_search(y, cov.z, cfg);
      io::write_rank_table(dir / "rank_cv.csv", res);
      chosen = res.selected_rank;
      out << "cross-validation selected rank " << chosen << "\n";
    }

    const CpModel model = cp_als(y, chosen, als.config(Rng::derive_seed(seed, kAlsStream)));
    const BasisMaps basis = build_basis(model);
    const Matrix g = project(matricize(y, 3), basis);
    ChainSettings chain_cfg = sampler.chain;
    chain_cfg.seed = Rng::derive_seed(seed, kChainStream);
    const McmcChain chain =
        run_sampler(g, cov.z, sampler.prior.make(cov.z.cols(), chosen), chain_cfg, cov.column_names);

    io::write_model(dir / "model", model);
    io::write_chain(dir / "chain", chain, cov.column_names);
    io::write_key_values(dir / "fit.txt", {{"rank", std::to_string(chosen)},
                                           {"rank_source", use_cv ? "cv" : "fixed"},
                                           {"data_dims", dims_string(y.dims())},
                                           {"columns", join_names(cov.column_names)},
                                           {"cp_fit", io::format_double(model.fit)},
                                           {"draws_retained", std::to_string(chain.size())},
                                           {"seed", std::to_string(seed)}});
    out << "fitted rank " << chosen << " (CP relative error " << io::format_double(model.fit) << "), kept "
        << chain.size() << " draws for [" << join_names(cov.column_names) << "], " << seconds_since(t0) << " s\n";
  }
};

struct InferCmd {
  std::string fit_dir;
  std::string contrast = "intercept";
  double alpha = 0.01;
  Index min_cluster = 125;
  int connectivity = 6;
  std::string mask_path;
  int threads = 0;
  std::string out_dir;

  void add(CLI::App& app) {
    app.add_option("--fit", fit_dir, "Directory written by fit")->required();
    app.add_option("--contrast", contrast, "Design column name or comma-separated weights")->capture_default_str();
    app.add_option("--alpha", alpha, "Significance level")->capture_default_str();
    app.add_option("--min-cluster-size", min_cluster, "Smallest reported cluster")->capture_default_str();
    app.add_option("--connectivity", connectivity, "Voxel neighbourhood")
        ->check(CLI::IsMember({6, 26}))
        ->capture_default_str();
    app.add_option("--mask", mask_path, "Brain mask volume (.nii or tensor; nonzero = inside)");
    app.add_option("--threads", threads, "Worker threads (0 = all cores)")->capture_default_str();
    app.add_option("--out", out_dir, "Output directory")->required();
  }

  void run(std::ostream& out) const {
    if (!(alpha > 0 && alpha < 1)) throw InvalidArgument("--alpha must lie in (0, 1)");
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path in(fit_dir), dir(out_dir);
    const CpModel model = io::read_model(in / "model");
    const io::StoredChain stored = io::read_chain(in / "chain");
    const BasisMaps basis = build_basis(model);
    const ContrastSpec c = parse_contrast(contrast, stored.column_names, stored.chain.covariates());

    VoxelMask mask;
    if (!mask_path.empty()) {
      const Tensor m = io::read_volume(mask_path);
      const SpatialDims& sd = basis.spatial_dims;
      if (m.dims() != Dims{sd[0], sd[1], sd[2]})
        throw InvalidData(mask_path + ": mask dims " + dims_string(m.dims()) + " differ from the model's " +
                          dims_string(Dims{sd[0], sd[1], sd[2]}));
      mask = m.values().array() != 0;
    }

    const SimBasResult r = simbas(stored.chain, basis, c, alpha, mask, threads);
    const auto clusters = extract_clusters(r.flags, basis.spatial_dims, min_cluster,
                                           connectivity == 26 ? Connectivity::Full : Connectivity::Face, r.mean_map);

    const SpatialDims& sd = basis.spatial_dims;
    io::write_tensor(dir / "mean.tnsr", to_volume(r.mean_map, sd));
    io::write_tensor(dir / "std.tnsr", to_volume(r.std_map, sd));
    io::write_tensor(dir / "psimbas.tnsr", to_volume(r.psimbas_map, sd));
    io::write_tensor(dir / "flags.tnsr", mask_to_tensor(r.flags, sd));
    io::write_tensor(dir / "z_quantiles.tnsr", io::vector_to_tensor(r.z_quantiles));
    io::write_clusters_csv(dir / "clusters.csv", clusters);
    const Index flagged = r.flags.count();
    io::write_key_values(dir / "infer.txt", {{"contrast", c.name()},
                                             {"weights", [&] {
                                                std::vector<std::string> w;
                                                for (Index j = 0; j < c.weights().size(); ++j)
                                                  w.push_back(io::format_double(c.weights()[j]));
                                                return join_names(w);
                                              }()},
                                             {"alpha", io::format_double(alpha)},
                                             {"band_quantile", io::format_double(r.band_quantile(alpha))},
                                             {"flagged_voxels", std::to_string(flagged)},
                                             {"clusters", std::to_string(clusters.size())},
                                             {"min_cluster_size", std::to_string(min_cluster)},
                                             {"connectivity", std::to_string(connectivity)},
                                             {"draws", std::to_string(r.draws())}});
    out << "contrast " << c.name() << ": " << flagged << " voxels with P_SimBas < " << alpha << ", "
        << clusters.size() << " clusters of at least " << min_cluster << " voxels, " << seconds_since(t0) << " s\n";
  }
};

struct ReportCmd {
  std::string dir;

  void add(CLI::App& app) { app.add_option("dir", dir, "Output directory of fit or infer")->required(); }

  void run(std::ostream& out) const {
    const fs::path d(dir);
    if (!fs::is_directory(d)) throw InvalidData("no such directory: " + dir);
    bool any = false;
    auto section = [&](const fs::path& file, const char* title) {
      if (!fs::exists(file)) return;
      any = true;
      out << "[" << title << "] " << file.string() << "\n";
      for (const auto& [k, v] : io::read_key_values(file)) out << "  " << k << " = " << v << "\n";
    };
    section(d / "fit.txt", "fit");
    section(d / "model" / "model.txt", "model");
    section(d / "chain" / "chain.txt", "chain");
    section(d / "model.txt", "model");
    section(d / "infer.txt", "inference");
    section(d / "truth" / "truth.txt", "simulation truth");
    if (fs::exists(d / "rank_cv.csv")) {
      any = true;
      const CvResult res = io::read_rank_table(d / "rank_cv.csv");
      out << "[rank cross-validation] selected rank " << res.selected_rank << "\n";
      for (std::size_t r = 0; r < res.ranks.size(); ++r)
        out << "  rank " << res.ranks[r] << ": " << io::format_double(res.per_rank_error[static_cast<Index>(r)])
            << "\n";
    }
    if (fs::exists(d / "clusters.csv")) {
      any = true;
      const auto rows = io::read_clusters_csv(d / "clusters.csv");
      out << "[clusters] " << rows.size() << "\n";
      for (const auto& c : rows)
        out << "  #" << c.id << ": " << c.size << " voxels, peak (" << c.peak[0] << "," << c.peak[1] << ","
            << c.peak[2] << ") = " << io::format_double(c.peak_value) << "\n";
    }
    if (!any) throw InvalidData(dir + " contains no recognised artifacts");
  }
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian tensor-basis group analysis of volumetric contrast maps", "cpfos"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  SimulateCmd simulate;
  DecomposeCmd decompose;
  RankCvCmd rank_cv;
  FitCmd fit;
  InferCmd infer;
  ReportCmd report;

  struct Entry {
    CLI::App* app;
    std::function<void(std::ostream&)> run;
  };
  std::vector<Entry> entries;
  auto add = [&](const char* name, const char* help, auto& cmd) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", "Flat key=value file; command-line flags take precedence");
    cmd.add(*sub);
    entries.push_back({sub, [&cmd](std::ostream& o) { cmd.run(o); }});
  };
  add("simulate", "Generate a synthetic dataset with known truth", simulate);
  add("decompose", "Fit a CP decomposition and save the model", decompose);
  add("rank-cv", "Cross-validate the CP rank and write the error table", rank_cv);
  add("fit", "Decompose, project and sample the basis-space posterior", fit);
  add("infer", "Contrast maps, P_SimBas significance and clusters", infer);
  add("report", "Summarize the artifacts in an output directory", report);

  try {
    std::vector<std::string> expanded = expand_config(args);
    std::vector<std::string> reversed(expanded.rbegin(), expanded.rend());
    app.parse(std::move(reversed));
    for (const auto& e : entries)
      if (e.app->parsed()) e.run(out);
    return kExitOk;
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    for (const auto& e : entries)
      if (e.app->parsed()) out << e.app->help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\nrun 'cpfos --help' for usage\n";
    return kExitArgument;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kExitArgument;
  } catch (const InvalidData& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace cpfos
