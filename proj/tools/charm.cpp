#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <thread>

#include "charm/chex.hpp"
#include "charm/error.hpp"
#include "charm/explain.hpp"
#include "charm/inpaint.hpp"
#include "charm/metrics.hpp"
#include "charm/modifiers.hpp"
#include "charm/refine.hpp"
#include "charm/service.hpp"

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

charm::AttentionAdjustment parse_gammas(const std::vector<std::string>& specs) {
    charm::AttentionAdjustment adj;
    for (const auto& s : specs) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw charm::ParseError("--gamma expects INDEX=VALUE, got " + s);
        try {
            adj.entries[std::stoul(s.substr(0, eq))] = std::stod(s.substr(eq + 1));
        } catch (const std::logic_error&) {
            throw charm::ParseError("--gamma expects INDEX=VALUE, got " + s);
        }
    }
    return adj;
}

nlohmann::json read_json_arg(const std::string& arg) {
    if (!arg.empty() && (arg.front() == '[' || arg.front() == '{')) return nlohmann::json::parse(arg);
    const auto bytes = charm::read_file(arg);
    return nlohmann::json::parse(bytes.begin(), bytes.end());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"charm: interactive text-to-image steering engine"};
    app.require_subcommand(1);

    charm::ServiceConfig cfg;
    std::string config_file;
    if (const char* env = std::getenv("CHARM_CONFIG")) config_file = env;
    app.add_option("--config", config_file, "JSON config (default: $CHARM_CONFIG)");

    std::uint64_t encoder_seed = 0;
    std::uint64_t weight_seed = 0;
    std::size_t steps = 0;
    auto* encoder_opt = app.add_option("--encoder-seed", encoder_seed, "text encoder seed");
    auto* weight_opt = app.add_option("--weight-seed", weight_seed, "model weight seed");
    auto* steps_opt = app.add_option("--steps", steps, "sampling steps");

    // mine
    auto* mine_cmd = app.add_subcommand("mine", "mine modifier phrases from a prompt corpus");
    std::string corpus_path, catalog_out;
    charm::MiningOptions mining;
    bool once = false;
    mine_cmd->add_option("corpus", corpus_path, "corpus (.txt lines or .csv)")->required();
    mine_cmd->add_option("-o,--out", catalog_out, "catalog JSON path")->required();
    auto* min_freq_opt = mine_cmd->add_option("--min-freq", mining.min_freq);
    auto* top_k_opt = mine_cmd->add_option("--top-k", mining.top_k);
    mine_cmd->add_flag("--once-per-prompt", once);

    // generate / explain
    std::string prompt, out_path;
    std::uint64_t seed = 0;
    std::vector<std::string> gammas;
    auto* gen_cmd = app.add_subcommand("generate", "generate an image");
    gen_cmd->add_option("prompt", prompt)->required();
    gen_cmd->add_option("--seed", seed);
    gen_cmd->add_option("--gamma", gammas, "INDEX=VALUE attention scale, repeatable");
    gen_cmd->add_option("-o,--out", out_path, "PNG path")->required();

    std::string chex_out;
    auto* explain_cmd = app.add_subcommand("explain", "generate with tracing and print per-token saliency");
    explain_cmd->add_option("prompt", prompt)->required();
    explain_cmd->add_option("--seed", seed);
    explain_cmd->add_option("--gamma", gammas);
    explain_cmd->add_option("--heatmaps", chex_out, "write CHEX heatmaps here");
    explain_cmd->add_option("--image", out_path, "write the PNG here");

    // inpaint
    std::string image_path, strokes_arg, mask_path;
    std::optional<std::string> aux_prompt;
    charm::InpaintOptions inpaint_opts;
    auto* inpaint_cmd = app.add_subcommand("inpaint", "regenerate the masked region of an image");
    inpaint_cmd->add_option("image", image_path)->required();
    auto* strokes_opt = inpaint_cmd->add_option("--strokes", strokes_arg, "JSON array of {x,y,r} or a file");
    auto* mask_opt = inpaint_cmd->add_option("--mask", mask_path, "mask PNG (white = regenerate)");
    strokes_opt->excludes(mask_opt);
    inpaint_cmd->add_option("--prompt", aux_prompt);
    inpaint_cmd->add_option("--seed", seed);
    inpaint_cmd->add_option("--strength", inpaint_opts.strength);
    inpaint_cmd->add_option("-o,--out", out_path)->required();

    // refine
    std::string catalog_path, strategy, endpoint;
    std::size_t k_append = 0;
    auto* refine_cmd = app.add_subcommand("refine", "append modifiers to a prompt");
    refine_cmd->add_option("prompt", prompt)->required();
    refine_cmd->add_option("--catalog", catalog_path);
    refine_cmd->add_option("--corpus", corpus_path);
    auto* k_opt = refine_cmd->add_option("-k,--k-append", k_append);
    refine_cmd->add_option("--strategy", strategy)->check(CLI::IsMember({"heuristic", "external"}));
    refine_cmd->add_option("--endpoint", endpoint);

    // ssim
    std::string a_path, b_path;
    auto* ssim_cmd = app.add_subcommand("ssim", "SSIM between two PNGs");
    ssim_cmd->add_option("a", a_path)->required();
    ssim_cmd->add_option("b", b_path)->required();

    // serve
    std::string host, session_dir;
    int port = -1;
    std::size_t workers = 0;
    auto* serve_cmd = app.add_subcommand("serve", "run the HTTP service");
    serve_cmd->add_option("--host", host);
    serve_cmd->add_option("--port", port);
    serve_cmd->add_option("--session-dir", session_dir);
    serve_cmd->add_option("--catalog", catalog_path);
    serve_cmd->add_option("--corpus", corpus_path);
    serve_cmd->add_option("--workers", workers);

    CLI11_PARSE(app, argc, argv);

    try {
        if (!config_file.empty()) cfg = charm::load_service_config(config_file);
        if (*encoder_opt) cfg.encoder_seed = encoder_seed;
        if (*weight_opt) cfg.model.weight_seed = weight_seed;
        if (*steps_opt) cfg.model.steps = steps;
        cfg.model.validate();
        const auto stopwords =
            cfg.stopwords_path ? charm::load_stopwords(*cfg.stopwords_path) : charm::default_stopwords();
        const charm::TextEncoder encoder(cfg.encoder_seed, stopwords);

        if (*mine_cmd) {
            if (!*min_freq_opt) mining.min_freq = cfg.mining.min_freq;
            if (!*top_k_opt) mining.top_k = cfg.mining.top_k;
            mining.once_per_prompt = once || cfg.mining.once_per_prompt;
            const auto catalog = charm::mine(charm::load_corpus(corpus_path), encoder, mining, corpus_path);
            charm::save_catalog(catalog, catalog_out);
            std::cout << catalog.size() << " modifiers -> " << catalog_out << "\n";
            return 0;
        }

        if (*ssim_cmd) {
            const auto a = charm::decode_png(charm::read_file(a_path));
            const auto b = charm::decode_png(charm::read_file(b_path));
            std::printf("%.4f\n", charm::ssim(a, b));
            return 0;
        }

        if (*refine_cmd) {
            auto rc = cfg.refiner;
            if (*k_opt) rc.k_append = k_append;
            if (!strategy.empty())
                rc.strategy = strategy == "external" ? charm::RefinerStrategy::external : charm::RefinerStrategy::heuristic;
            if (!endpoint.empty()) rc.external_endpoint = endpoint;
            charm::ModifierCatalog catalog;
            if (!catalog_path.empty())
                catalog = charm::load_catalog(catalog_path);
            else if (cfg.catalog_path)
                catalog = charm::load_catalog(*cfg.catalog_path);
            else if (!corpus_path.empty() || cfg.corpus_path) {
                const std::string p = !corpus_path.empty() ? corpus_path : cfg.corpus_path->string();
                catalog = charm::mine(charm::load_corpus(p), encoder, cfg.mining, p);
            }
            std::cout << charm::to_json(charm::refine(prompt, catalog, stopwords, rc)).dump(2) << "\n";
            return 0;
        }

        if (*serve_cmd) {
            if (!host.empty()) cfg.host = host;
            if (port >= 0) cfg.port = port;
            if (!session_dir.empty()) cfg.session_dir = session_dir;
            if (!catalog_path.empty()) cfg.catalog_path = catalog_path;
            if (!corpus_path.empty()) cfg.corpus_path = corpus_path;
            if (workers > 0) cfg.workers = workers;
            charm::Service service(cfg);
            service.start();
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cout << "listening on " << cfg.host << ":" << service.port() << std::endl;
            while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
            service.stop();
            return 0;
        }

        const charm::ToyBackbone model(cfg.model);

        if (*gen_cmd || *explain_cmd) {
            const auto p = encoder.tokenize(prompt);
            const auto adj = parse_gammas(gammas);
            charm::validate(adj, p);
            const bool trace = static_cast<bool>(*explain_cmd);
            auto result = charm::generate(model, encoder.encode(p), seed, &adj, {trace, false});
            if (!out_path.empty()) charm::write_file(out_path, charm::encode_png(result.image.rgb));
            if (trace) {
                const auto ex = charm::aggregate(*result.trace, p, cfg.model);
                std::cout << charm::explanation_summary(ex, p, cfg.model, cfg.similarity_threshold).dump(2) << "\n";
                if (!chex_out.empty())
                    charm::write_file(chex_out, charm::encode_chex(charm::heatmaps_to_chex(ex, cfg.model)));
            }
            return 0;
        }

        if (*inpaint_cmd) {
            charm::InpaintRequest req;
            req.image = charm::decode_png(charm::read_file(image_path));
            if (!mask_path.empty())
                req.mask = charm::decode_mask_png(charm::read_file(mask_path));
            else if (!strokes_arg.empty())
                req.mask = charm::rasterize_strokes(charm::strokes_from_json(read_json_arg(strokes_arg)),
                                                    req.image.width, req.image.height);
            else
                throw charm::ParseError("inpaint needs --strokes or --mask");
            req.prompt = aux_prompt;
            req.seed = seed;
            charm::write_file(out_path, charm::encode_png(charm::inpaint(model, encoder, req, inpaint_opts)));
            return 0;
        }
    } catch (const charm::Error& e) {
        std::cerr << "error: " << e.kind() << ": " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
