#include "mvae/analysis.hpp"
#include "mvae/config.hpp"
#include "mvae/data.hpp"
#include "mvae/pipeline.hpp"
#include "mvae/projection.hpp"
#include "mvae/svg.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

namespace fs = std::filesystem;
using namespace mvae;

namespace {

struct CliOverrides {
    std::string config_path;
    std::string out_dir;
    std::int64_t seed = -1;
    int folds = -1;
    int latent_dim = -1;
    int top_k = -1;
};

RunConfig load_config(const CliOverrides& ov) {
    RunConfig cfg = ov.config_path.empty() ? default_run_config() : parse_run_config(ov.config_path);
    if (!ov.out_dir.empty()) cfg.out_dir = ov.out_dir;
    if (ov.seed >= 0) cfg.training.seed = static_cast<std::uint64_t>(ov.seed);
    if (ov.folds > 0) cfg.training.folds = ov.folds;
    if (ov.latent_dim > 0) cfg.arch.latent_dim = ov.latent_dim;
    if (ov.top_k > 0) cfg.top_k = ov.top_k;
    cfg.validate();
    return cfg;
}

std::string cohort_dir(const RunConfig& cfg) { return (fs::path(cfg.out_dir) / "cohort").string(); }
std::string checkpoint_path(const RunConfig& cfg, int fold) {
    return (fs::path(cfg.out_dir) / ("fold" + std::to_string(fold) + ".ckpt")).string();
}

void cmd_synth(const RunConfig& cfg) {
    Cohort cohort = generate_cohort(cfg.cohort, cfg.training.seed);
    write_cohort(cohort_dir(cfg), cohort);
    std::cout << "wrote " << cohort.subjects.size() << " subjects x " << cohort.n_modalities
              << " modalities to " << cohort_dir(cfg) << "\n";
}

void cmd_train(const RunConfig& cfg) {
    Cohort cohort = read_cohort(cohort_dir(cfg));
    FoldSplit split = stratified_kfold(cohort.labels(), cfg.training.folds,
                                       cfg.training.validation_fraction, cfg.training.seed);
    std::vector<VaeParameters> params;
    std::vector<std::vector<EpochRecord>> histories;
    train_folds(cohort, split, cfg.pipeline(), params, histories);
    for (int f = 0; f < cfg.training.folds; ++f) {
        save_checkpoint(checkpoint_path(cfg, f), params[f]);
        write_history((fs::path(cfg.out_dir) / ("history_fold" + std::to_string(f) + ".tsv"))
                          .string(),
                      histories[f]);
    }
    std::cout << "trained " << cfg.training.folds << " folds, checkpoints in " << cfg.out_dir
              << "\n";
}

struct LoadedRun {
    Cohort cohort;
    FoldSplit split;
    std::vector<VaeParameters> params;
};

LoadedRun load_run(const RunConfig& cfg) {
    LoadedRun run;
    run.cohort = read_cohort(cohort_dir(cfg));
    run.split = stratified_kfold(run.cohort.labels(), cfg.training.folds,
                                 cfg.training.validation_fraction, cfg.training.seed);
    for (int f = 0; f < cfg.training.folds; ++f) {
        std::string path = checkpoint_path(cfg, f);
        if (!fs::exists(path)) throw std::runtime_error("missing checkpoint: " + path);
        run.params.push_back(load_checkpoint(path));
    }
    return run;
}

void cmd_evaluate(const RunConfig& cfg) {
    LoadedRun run = load_run(cfg);
    CvResult cv = cv_classification(run.cohort, run.params, run.split, cfg.svm_c);

    std::ofstream auc(fs::path(cfg.out_dir) / "auc_report.tsv");
    auc.precision(9);
    auc << "fold\tauc\n";
    for (std::size_t f = 0; f < cv.fold_auc.size(); ++f) auc << f << "\t" << cv.fold_auc[f] << "\n";
    auc << "mean\t" << cv.mean << "\n";
    auc << "std\t" << cv.stddev << "\n";

    const int n = run.cohort.n_modalities;
    const int l = cfg.arch.latent_dim;
    std::vector<std::vector<double>> per_fold;
    for (const auto& model : cv.fold_models) per_fold.push_back(modality_importance(model, n, l));
    std::vector<double> mean(n, 0.0), stddev(n, 0.0);
    for (const auto& imp : per_fold)
        for (int m = 0; m < n; ++m) mean[m] += imp[m];
    for (auto& v : mean) v /= static_cast<double>(per_fold.size());
    if (per_fold.size() > 1) {
        for (const auto& imp : per_fold)
            for (int m = 0; m < n; ++m) stddev[m] += (imp[m] - mean[m]) * (imp[m] - mean[m]);
        for (auto& v : stddev) v = std::sqrt(v / static_cast<double>(per_fold.size() - 1));
    }
    std::ofstream imp(fs::path(cfg.out_dir) / "importance.tsv");
    imp.precision(9);
    imp << "modality\tmean_importance\tstd\n";
    for (int m = 0; m < n; ++m) imp << m << "\t" << mean[m] << "\t" << stddev[m] << "\n";

    // top bars sorted ascending left-to-right: rightmost is the most important
    std::vector<int> order = top_modalities(mean, std::min(n, 10));
    std::reverse(order.begin(), order.end());
    std::vector<Bar> bars;
    for (int m : order)
        bars.push_back({"mod " + std::to_string(m), mean[m], stddev[m]});
    write_bar_svg((fs::path(cfg.out_dir) / "importance.svg").string(), bars,
                  "Per-modality SVM importance (mean over folds)");

    std::cout.precision(6);
    std::cout << "mean AUC " << cv.mean << " (std " << cv.stddev << ") over "
              << cv.fold_auc.size() << " folds\n";
}

void cmd_diffmap(const RunConfig& cfg) {
    Cohort cohort = read_cohort(cohort_dir(cfg));
    FoldSplit split = stratified_kfold(cohort.labels(), cfg.training.folds,
                                       cfg.training.validation_fraction, cfg.training.seed);
    std::string ck0 = checkpoint_path(cfg, 0);
    if (!fs::exists(ck0)) throw std::runtime_error("missing checkpoint: " + ck0);
    VaeParameters params = load_checkpoint(ck0);
    EmbeddingMatrix em = embed_dataset(cohort, params);
    std::vector<int> labels = cohort.labels();

    // fold-0 SVM picks the top modalities
    std::vector<int> fit_rows = split.folds[0].train;
    fit_rows.insert(fit_rows.end(), split.folds[0].val.begin(), split.folds[0].val.end());
    Eigen::MatrixXd Xfit(static_cast<long>(fit_rows.size()), em.features.cols());
    std::vector<int> yfit;
    for (std::size_t i = 0; i < fit_rows.size(); ++i) {
        Xfit.row(static_cast<long>(i)) = em.features.row(fit_rows[i]);
        yfit.push_back(labels[fit_rows[i]]);
    }
    SvmModel model = train_linear_svm(Xfit, yfit, cfg.svm_c);
    std::vector<double> importance = modality_importance(model, cohort.n_modalities,
                                                         cfg.arch.latent_dim);
    std::vector<int> top = top_modalities(importance, cfg.top_k);

    DifferenceMap vae_map = group_difference_map(params, em, labels, top);
    DifferenceMap vox_map = voxelwise_group_difference(cohort, top);
    write_volume((fs::path(cfg.out_dir) / "diffmap_vae.vvol").string(), vae_map.map);
    write_volume((fs::path(cfg.out_dir) / "diffmap_voxel.vvol").string(), vox_map.map);

    Volume mask = effect_site_mask(cfg.cohort);
    double dice = dice_overlap(vae_map.map, mask);
    double cosine = cosine_similarity(vae_map.map, vox_map.map);

    // permutation null for the effect-site overlap
    std::mt19937_64 rng(cfg.training.seed ^ 0xD1FFULL);
    const int n_perm = 20;
    double null_mean = 0.0, null_max = 0.0;
    std::vector<int> perm = labels;
    for (int p = 0; p < n_perm; ++p) {
        std::shuffle(perm.begin(), perm.end(), rng);
        DifferenceMap pm = group_difference_map(params, em, perm, top);
        double d = dice_overlap(pm.map, mask);
        null_mean += d;
        null_max = std::max(null_max, d);
    }
    null_mean /= n_perm;

    std::ofstream sum(fs::path(cfg.out_dir) / "diffmap_summary.txt");
    sum.precision(9);
    sum << "top_modalities ";
    for (std::size_t i = 0; i < top.size(); ++i) sum << (i ? "," : "") << top[i];
    sum << "\ncosine_vae_vs_voxelwise " << cosine << "\n";
    sum << "dice_vae_vs_effect_site " << dice << "\n";
    sum << "dice_permutation_null_mean " << null_mean << "\n";
    sum << "dice_permutation_null_max " << null_max << "\n";
    std::cout.precision(6);
    std::cout << "effect-site dice " << dice << " (null mean " << null_mean << "), cosine "
              << cosine << "\n";
}

void cmd_project(const RunConfig& cfg) {
    Cohort cohort = read_cohort(cohort_dir(cfg));
    std::string ck0 = checkpoint_path(cfg, 0);
    if (!fs::exists(ck0)) throw std::runtime_error("missing checkpoint: " + ck0);
    VaeParameters params = load_checkpoint(ck0);
    EmbeddingMatrix em = embed_dataset(cohort, params);

    const int n = cohort.n_modalities;
    const int l = cfg.arch.latent_dim;
    const long points = static_cast<long>(cohort.subjects.size()) * n;
    Eigen::MatrixXd X(points, l);
    std::vector<int> modality(points);
    std::vector<std::string> subject(points);
    long row = 0;
    for (std::size_t j = 0; j < cohort.subjects.size(); ++j)
        for (int m = 0; m < n; ++m, ++row) {
            X.row(row) = em.features.row(static_cast<long>(j)).segment(static_cast<long>(m) * l, l);
            modality[row] = m;
            subject[row] = cohort.subjects[j].id;
        }

    double sil = silhouette_score(X, modality);
    double perplexity = std::min(cfg.tsne_perplexity, static_cast<double>(points) / 3.0);
    AffinityMatrix aff = perplexity_affinities(X, perplexity);
    if (aff.jittered_rows > 0)
        std::cerr << "note: " << aff.jittered_rows << " duplicate rows jittered in t-SNE input\n";
    ProjectionResult proj = tsne_embed(aff, cfg.tsne_iters, cfg.tsne_learning_rate,
                                       cfg.training.seed);

    std::ofstream tsv(fs::path(cfg.out_dir) / "projection.tsv");
    tsv.precision(9);
    tsv << "x\ty\tsubject\tmodality\n";
    std::vector<ScatterPoint> pts;
    for (long i = 0; i < points; ++i) {
        tsv << proj.Y(i, 0) << "\t" << proj.Y(i, 1) << "\t" << subject[i] << "\t" << modality[i]
            << "\n";
        pts.push_back({proj.Y(i, 0), proj.Y(i, 1), modality[i],
                       subject[i] + " mod " + std::to_string(modality[i])});
    }
    write_scatter_svg((fs::path(cfg.out_dir) / "projection.svg").string(), pts,
                      "Latent space t-SNE, colored by modality");
    std::cout.precision(6);
    std::cout << points << " points, modality silhouette " << sil << ", final KL " << proj.kl
              << "\n";
}

void cmd_sweep(const RunConfig& cfg, const std::string& seeds_csv) {
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(seeds_csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) seeds.push_back(std::stoull(tok));
    Cohort cohort = read_cohort(cohort_dir(cfg));
    SeedSweepResult sweep = run_seed_sweep(cohort, seeds, cfg.pipeline());
    std::ofstream tsv(fs::path(cfg.out_dir) / "sweep.tsv");
    tsv.precision(9);
    tsv << "seed\tmean_auc\n";
    for (std::size_t i = 0; i < seeds.size(); ++i)
        tsv << sweep.seeds[i] << "\t" << sweep.auc[i] << "\n";
    tsv << "mean\t" << sweep.mean << "\n";
    tsv << "std\t" << sweep.stddev << "\n";
    std::cout.precision(6);
    std::cout << "sweep over " << seeds.size() << " seeds: mean AUC " << sweep.mean << ", std "
              << sweep.stddev << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Shared encoder-decoder multimodal VAE pipeline"};
    app.require_subcommand(1);

    CliOverrides ov;
    app.add_option("--config", ov.config_path, "config file (key = value lines)");
    app.add_option("--out", ov.out_dir, "output directory");
    app.add_option("--seed", ov.seed, "seed override");
    app.add_option("--folds", ov.folds, "CV fold count override");
    app.add_option("--latent-dim", ov.latent_dim, "latent dimensionality override");
    app.add_option("--top-k", ov.top_k, "top modality count override");

    auto* synth = app.add_subcommand("synth", "generate a synthetic cohort on disk");
    auto* train = app.add_subcommand("train", "train per-fold VAEs, write checkpoints");
    auto* evaluate = app.add_subcommand("evaluate", "SVM CV evaluation + importance report");
    auto* diffmap = app.add_subcommand("diffmap", "decoded and voxelwise group-difference maps");
    auto* project = app.add_subcommand("project", "t-SNE projection of the latent space");
    auto* sweep = app.add_subcommand("sweep", "full pipeline over several seeds");
    std::string seeds_csv = "1,2,3,4,5";
    sweep->add_option("--seeds", seeds_csv, "comma-separated seed list");

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg = load_config(ov);
        fs::create_directories(cfg.out_dir);
        if (synth->parsed()) cmd_synth(cfg);
        else if (train->parsed()) cmd_train(cfg);
        else if (evaluate->parsed()) cmd_evaluate(cfg);
        else if (diffmap->parsed()) cmd_diffmap(cfg);
        else if (project->parsed()) cmd_project(cfg);
        else if (sweep->parsed()) cmd_sweep(cfg, seeds_csv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
