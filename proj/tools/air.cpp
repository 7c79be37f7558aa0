#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "air/air.hpp"

namespace fs = std::filesystem;

namespace {

struct Common {
    fs::path corpus;
    fs::path out;
    std::uint64_t seed = 0;
    std::size_t k_fallback = 20;
    std::size_t k_neg = 3;
    double tau = 0.3;
    double sigma_fix = 9.0;
    std::size_t map_size = 256;
    double theta = 1.0;
    double phi = 1.0;
    double edr_eps = 9.0;
    fs::path alias_table;
    bool lenient = false;
    std::vector<fs::path> sources;
    fs::path config;
};

air::Corpus open_corpus(const Common& c)
{
    air::CorpusOptions o;
    o.resolve.k = c.k_fallback;
    o.mode = c.lenient ? air::LoweringMode::Lenient : air::LoweringMode::Strict;
    if (!c.alias_table.empty()) {
        o.alias_table = c.alias_table;
    }
    air::Corpus corpus = air::load_corpus(c.corpus, o);
    for (const auto& w : corpus.warnings) {
        std::cerr << "warning: skipped " << w.message << "\n";
    }
    return corpus;
}

air::FixationMapOptions map_options(const Common& c)
{
    air::FixationMapOptions m;
    m.out_size = c.map_size;
    m.sigma = c.sigma_fix;
    return m;
}

air::Json read_config(const fs::path& p) { return p.empty() ? air::Json::object() : air::detail::read_json_file(p); }

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Reasoning-aware attention evaluation toolkit"};
    app.require_subcommand(1);
    Common c;

    auto corpus_flags = [&](CLI::App* sub) {
        sub->add_option("--corpus", c.corpus, "Corpus directory")->required()->check(CLI::ExistingDirectory);
        sub->add_option("--k-fallback", c.k_fallback, "Co-occurring categories used by the ROI fallback")
            ->capture_default_str();
        sub->add_option("--alias-table", c.alias_table, "JSON alias table merged over the builtin one")
            ->check(CLI::ExistingFile);
        auto* strict = sub->add_flag("--strict", "Unknown operation text is an error (default)");
        sub->add_flag("--lenient", c.lenient, "Skip unknown operation lines with a warning")->excludes(strict);
    };
    auto out_flag = [&](CLI::App* sub) { sub->add_option("--out", c.out, "Output directory")->required(); };
    auto map_flags = [&](CLI::App* sub) {
        sub->add_option("--sigma-fix", c.sigma_fix, "Fixation map blur sigma in grid pixels")->capture_default_str();
        sub->add_option("--map-size", c.map_size, "Side of square output maps")->capture_default_str();
    };

    auto* decompose = app.add_subcommand("decompose", "Lower programs and list each step's ROIs");
    corpus_flags(decompose);
    out_flag(decompose);

    auto* score = app.add_subcommand("score", "AiR-E per step and per operation for one attention source");
    corpus_flags(score);
    out_flag(score);
    map_flags(score);
    score->add_option("--sources", c.sources, "Source description file")->required()->expected(1);

    auto* fixmap = app.add_subcommand("fixmap", "Fixation maps per question, temporal bin and answer group");
    corpus_flags(fixmap);
    out_flag(fixmap);
    map_flags(fixmap);

    auto* targets = app.add_subcommand("targets", "Step attention targets and mined negatives");
    corpus_flags(targets);
    out_flag(targets);
    targets->add_option("--k-neg", c.k_neg, "Negatives kept per question")->capture_default_str();
    targets->add_option("--tau", c.tau, "Maximum overlap ratio of a negative with any positive")->capture_default_str();
    targets->add_option("--map-size", c.map_size, "Side of the negative map")->capture_default_str();

    auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with attention sources");
    out_flag(synth);
    synth->add_option("--config", c.config, "JSON synthetic-corpus config")->check(CLI::ExistingFile);
    auto* synth_seed = synth->add_option("--seed", c.seed, "Overrides the config seed");

    auto* train = app.add_subcommand("train-toy", "Train the toy reasoning model");
    out_flag(train);
    train->add_option("--config", c.config, "JSON toy config")->check(CLI::ExistingFile);
    train->add_option("--seed", c.seed, "Data, init and shuffling seed")->capture_default_str();
    auto* theta = train->add_option("--theta", c.theta, "Weight of the attention loss");
    auto* phi = train->add_option("--phi", c.phi, "Weight of the operation loss");

    auto* analyze = app.add_subcommand("analyze", "All analyses the corpus and sources support");
    corpus_flags(analyze);
    out_flag(analyze);
    map_flags(analyze);
    analyze->add_option("--sources", c.sources, "Source description files");
    analyze->add_option("--edr-eps", c.edr_eps, "EDR match radius in grid pixels")->capture_default_str();
    analyze->add_option("--seed", c.seed, "Split-half consistency seed")->capture_default_str();
    bool no_figures = false;
    analyze->add_flag("--no-figures", no_figures, "Skip PNG heatmaps");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*decompose) {
            air::cmd_decompose(open_corpus(c), c.out);
        } else if (*score) {
            const air::Corpus corpus = open_corpus(c);
            const auto src = air::load_source(c.sources.front(), corpus, map_options(c));
            air::cmd_score(corpus, src, c.out, air::worker_count());
        } else if (*fixmap) {
            air::FixmapOptions o;
            o.map = map_options(c);
            air::cmd_fixmap(open_corpus(c), o, c.out, air::worker_count());
        } else if (*targets) {
            air::cmd_targets(open_corpus(c), {c.k_neg, c.tau, c.map_size}, c.out, air::worker_count());
        } else if (*synth) {
            air::SynthConfig cfg = air::synth_config_from_json(read_config(c.config));
            if (synth_seed->count()) {
                cfg.seed = c.seed;
            }
            air::cmd_synth(cfg, c.out);
        } else if (*train) {
            air::ToyRunConfig cfg = air::toy_config_from_json(read_config(c.config));
            if (theta->count()) {
                cfg.train.objective.loss.theta = c.theta;
            }
            if (phi->count()) {
                cfg.train.objective.loss.phi = c.phi;
            }
            const air::Json j = air::cmd_train_toy(cfg, c.seed, c.out);
            const auto& test = j.at("run").at("test");
            std::printf("answer_accuracy %.6f op_accuracy %.6f aire %.6f\n", test.at("answer_accuracy").get<double>(),
                        test.at("op_accuracy").get<double>(), test.at("aire").get<double>());
        } else if (*analyze) {
            const air::Corpus corpus = open_corpus(c);
            air::AnalysisOptions o;
            o.map = map_options(c);
            o.edr_eps = c.edr_eps;
            o.seed = c.seed;
            o.figures = !no_figures;
            air::Json overrides = air::Json::object();
            for (const auto* opt : analyze->get_options()) {
                const std::string name = opt->get_name();
                if (opt->count() && name != "--help" && name != "--corpus" && name != "--out" && name != "--sources") {
                    overrides[name] = opt->as<std::string>();
                }
            }
            air::cmd_analyze(corpus, c.sources, o, c.out, overrides);
        }
    } catch (const air::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return air::exit_code(e.kind());
    } catch (const air::Json::exception& e) {
        std::cerr << "error: SchemaViolation: " << e.what() << "\n";
        return air::exit_code(air::ErrorKind::SchemaViolation);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
