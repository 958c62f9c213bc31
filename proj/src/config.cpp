#include "mvae/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mvae {

void RunConfig::validate() const {
    cohort.validate();
    arch.validate();
    training.validate();
    if (arch.input_extents != cohort.extents)
        throw std::invalid_argument("architecture input extents must match cohort extents");
    if (svm_c <= 0.0) throw std::invalid_argument("svm_c must be positive");
    if (top_k < 1) throw std::invalid_argument("top_k must be at least 1");
    if (tsne_perplexity <= 1.0) throw std::invalid_argument("tsne_perplexity must exceed 1");
    if (tsne_iters < 1) throw std::invalid_argument("tsne_iters must be positive");
    if (tsne_learning_rate <= 0.0) throw std::invalid_argument("tsne_learning_rate must be positive");
    if (threads < 1) throw std::invalid_argument("threads must be at least 1");
    if (out_dir.empty()) throw std::invalid_argument("out_dir must not be empty");
}

PipelineConfig RunConfig::pipeline() const {
    PipelineConfig pc;
    pc.arch = arch;
    pc.training = training;
    pc.svm_c = svm_c;
    pc.threads = threads;
    return pc;
}

RunConfig default_run_config() { return RunConfig{}; }

namespace {

std::vector<int> parse_int_list(const std::string& s, const std::string& key) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            out.push_back(std::stoi(tok));
        } catch (const std::exception&) {
            throw std::invalid_argument("config: bad integer list for '" + key + "'");
        }
    }
    if (out.empty()) throw std::invalid_argument("config: empty list for '" + key + "'");
    return out;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
}

}  // namespace

RunConfig parse_run_config_text(const std::string& text) {
    RunConfig cfg = default_run_config();
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        try {
            if (key == "subjects") cfg.cohort.n_subjects = std::stoi(val);
            else if (key == "modalities") cfg.cohort.n_modalities = std::stoi(val);
            else if (key == "effect_modalities") cfg.cohort.n_effect_modalities = std::stoi(val);
            else if (key == "effect_size") cfg.cohort.effect_size = std::stod(val);
            else if (key == "noise_sigma") cfg.cohort.noise_sigma = std::stod(val);
            else if (key == "extents") {
                auto v = parse_int_list(val, key);
                if (v.size() != 3)
                    throw std::invalid_argument("config: extents needs three values");
                cfg.cohort.extents = {v[0], v[1], v[2]};
                cfg.arch.input_extents = cfg.cohort.extents;
            } else if (key == "encoder_channels") cfg.arch.encoder_channels = parse_int_list(val, key);
            else if (key == "decoder_channels") cfg.arch.decoder_channels = parse_int_list(val, key);
            else if (key == "latent_dim") cfg.arch.latent_dim = std::stoi(val);
            else if (key == "learning_rate") cfg.training.learning_rate = std::stod(val);
            else if (key == "adam_beta1") cfg.training.adam_beta1 = std::stod(val);
            else if (key == "adam_beta2") cfg.training.adam_beta2 = std::stod(val);
            else if (key == "adam_eps") cfg.training.adam_eps = std::stod(val);
            else if (key == "epochs") cfg.training.epochs = std::stoi(val);
            else if (key == "seed") cfg.training.seed = std::stoull(val);
            else if (key == "kl_weight") cfg.training.kl_weight = std::stod(val);
            else if (key == "folds") cfg.training.folds = std::stoi(val);
            else if (key == "validation_fraction") cfg.training.validation_fraction = std::stod(val);
            else if (key == "svm_c") cfg.svm_c = std::stod(val);
            else if (key == "top_k") cfg.top_k = std::stoi(val);
            else if (key == "tsne_perplexity") cfg.tsne_perplexity = std::stod(val);
            else if (key == "tsne_iters") cfg.tsne_iters = std::stoi(val);
            else if (key == "tsne_learning_rate") cfg.tsne_learning_rate = std::stod(val);
            else if (key == "out_dir") cfg.out_dir = val;
            else if (key == "threads") cfg.threads = std::stoi(val);
            else
                throw std::invalid_argument("config: unknown key '" + key + "' at line " +
                                            std::to_string(lineno));
        } catch (const std::invalid_argument&) {
            throw;
        } catch (const std::exception&) {
            throw std::invalid_argument("config: bad value for '" + key + "' at line " +
                                        std::to_string(lineno));
        }
    }
    cfg.validate();
    return cfg;
}

RunConfig parse_run_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config file: " + path);
    std::stringstream buf;
    buf << is.rdbuf();
    return parse_run_config_text(buf.str());
}

}  // namespace mvae
