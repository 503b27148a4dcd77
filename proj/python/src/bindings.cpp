#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "charm/error.hpp"
#include "charm/explain.hpp"
#include "charm/inpaint.hpp"
#include "charm/metrics.hpp"
#include "charm/modifiers.hpp"
#include "charm/refine.hpp"
#include "charm/service.hpp"

namespace py = pybind11;

namespace {

using Image = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

// nlohmann -> python through the stdlib json module keeps number types intact.
py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::json from_py(const py::handle& o) {
    return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

py::array_t<std::uint8_t> to_array(const charm::RgbImage& img) {
    py::array_t<std::uint8_t> out({img.height, img.width, std::size_t{3}});
    std::memcpy(out.mutable_data(), img.data.data(), img.data.size());
    return out;
}

charm::RgbImage from_array(const Image& a) {
    if (a.ndim() != 3 || a.shape(2) != 3) throw charm::DimensionMismatch("expected an HxWx3 uint8 array");
    charm::RgbImage img(a.shape(1), a.shape(0));
    std::memcpy(img.data.data(), a.data(), img.data.size());
    return img;
}

charm::AttentionAdjustment gammas(const std::optional<std::map<std::size_t, double>>& g) {
    charm::AttentionAdjustment adj;
    if (g) adj.entries = *g;
    return adj;
}

class Engine {
public:
    Engine(std::uint64_t encoder_seed, std::uint64_t weight_seed, std::size_t steps)
        : encoder_(encoder_seed), model_(make_config(weight_seed, steps)) {}

    py::array_t<std::uint8_t> generate(const std::string& prompt, std::uint64_t seed,
                                       const std::optional<std::map<std::size_t, double>>& g) const {
        charm::RgbImage img;
        {
            py::gil_scoped_release nogil;
            const auto p = encoder_.tokenize(prompt);
            const auto adj = gammas(g);
            charm::validate(adj, p);
            img = charm::generate(model_, encoder_.encode(p), seed, &adj).image.rgb;
        }
        return to_array(img);
    }

    py::tuple explain(const std::string& prompt, std::uint64_t seed,
                      const std::optional<std::map<std::size_t, double>>& g, double threshold) const {
        charm::RgbImage img;
        nlohmann::json summary;
        charm::ChexBlob maps;
        {
            py::gil_scoped_release nogil;
            const auto p = encoder_.tokenize(prompt);
            const auto adj = gammas(g);
            charm::validate(adj, p);
            auto r = charm::generate(model_, encoder_.encode(p), seed, &adj, {true, false});
            const auto ex = charm::aggregate(*r.trace, p, model_.config());
            summary = charm::explanation_summary(ex, p, model_.config(), threshold);
            maps = charm::heatmaps_to_chex(ex, model_.config());
            img = std::move(r.image.rgb);
        }
        py::array_t<float> heat({std::size_t{maps.count}, std::size_t{maps.height}, std::size_t{maps.width}});
        std::memcpy(heat.mutable_data(), maps.values.data(), maps.values.size() * sizeof(float));
        return py::make_tuple(to_array(img), to_py(summary), heat);
    }

    py::array_t<std::uint8_t> inpaint(const Image& image, const py::object& mask, const py::object& strokes,
                                      std::optional<std::string> prompt, std::uint64_t seed, double strength,
                                      bool blend_every_step) const {
        charm::InpaintRequest req;
        req.image = from_array(image);
        if (!mask.is_none()) {
            auto m = mask.cast<py::array_t<bool, py::array::c_style | py::array::forcecast>>();
            if (m.ndim() != 2) throw charm::DimensionMismatch("mask must be 2-D");
            req.mask = charm::Mask(m.shape(1), m.shape(0));
            for (py::ssize_t i = 0; i < m.size(); ++i) req.mask.bits[i] = m.data()[i] ? 1 : 0;
        } else if (!strokes.is_none()) {
            std::vector<charm::Stroke> s;
            for (const auto& t : strokes) {
                const auto xyr = t.cast<std::tuple<double, double, double>>();
                s.push_back({std::get<0>(xyr), std::get<1>(xyr), std::get<2>(xyr)});
            }
            req.mask = charm::rasterize_strokes(s, req.image.width, req.image.height);
        } else {
            throw charm::ParseError("inpaint needs a mask or strokes");
        }
        req.prompt = std::move(prompt);
        req.seed = seed;
        charm::RgbImage out;
        {
            py::gil_scoped_release nogil;
            out = charm::inpaint(model_, encoder_, req, {strength, blend_every_step});
        }
        return to_array(out);
    }

    py::object config() const { return to_py(charm::to_json(model_.config())); }
    std::uint64_t encoder_seed() const { return encoder_.seed(); }

private:
    static charm::ModelConfig make_config(std::uint64_t weight_seed, std::size_t steps) {
        charm::ModelConfig c;
        c.weight_seed = weight_seed;
        c.steps = steps;
        c.validate();
        return c;
    }

    charm::TextEncoder encoder_;
    charm::ToyBackbone model_;
};

py::list scored(const std::vector<charm::ScoredModifier>& items) {
    py::list out;
    for (const auto& s : items) {
        py::dict d;
        d["phrase"] = s.entry->phrase;
        d["n"] = s.entry->n;
        d["frequency"] = s.entry->frequency;
        d["distance"] = s.distance;
        out.append(d);
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "charm: attention-steerable toy text-to-image engine";

    // Instances carry the error kind (e.g. "GammaOutOfRange") as .kind.
    static PyObject* error = PyErr_NewException("charm._core.CharmError", PyExc_RuntimeError, nullptr);
    m.add_object("CharmError", py::handle(error));
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const charm::Error& e) {
            py::object inst = py::handle(error)(e.kind() + ": " + e.what());
            inst.attr("kind") = e.kind();
            PyErr_SetObject(error, inst.ptr());
        }
    });

    m.def("tokenize", [](const std::string& prompt) {
        std::vector<std::string> out;
        for (const auto& t : charm::tokenize(prompt).tokens) out.push_back(t.text);
        return out;
    }, py::arg("prompt"));

    py::class_<Engine>(m, "Engine")
        .def(py::init<std::uint64_t, std::uint64_t, std::size_t>(), py::arg("encoder_seed") = 0,
             py::arg("weight_seed") = 0, py::arg("steps") = 10)
        .def_property_readonly("config", &Engine::config)
        .def_property_readonly("encoder_seed", &Engine::encoder_seed)
        .def("generate", &Engine::generate, py::arg("prompt"), py::arg("seed") = 0, py::arg("gammas") = py::none(),
             "HxWx3 uint8 image. gammas maps token index to attention scale.")
        .def("explain", &Engine::explain, py::arg("prompt"), py::arg("seed") = 0, py::arg("gammas") = py::none(),
             py::arg("threshold") = charm::kDefaultSimilarityThreshold,
             "(image, summary, heatmaps) with heatmaps shaped tokens x H x W.")
        .def("inpaint", &Engine::inpaint, py::arg("image"), py::arg("mask") = py::none(),
             py::arg("strokes") = py::none(), py::arg("prompt") = py::none(), py::arg("seed") = 0,
             py::arg("strength") = 0.8, py::arg("blend_every_step") = true);

    py::class_<charm::ModifierCatalog>(m, "Catalog")
        .def_static("load", [](const std::string& path) { return charm::load_catalog(path); })
        .def("save", [](const charm::ModifierCatalog& c, const std::string& path) { charm::save_catalog(c, path); })
        .def("__len__", &charm::ModifierCatalog::size)
        .def_property_readonly("encoder_seed", &charm::ModifierCatalog::encoder_seed)
        .def_property_readonly("entries", [](const charm::ModifierCatalog& c) {
            py::list out;
            for (const auto& e : c.entries()) {
                py::dict d;
                d["phrase"] = e.phrase;
                d["n"] = e.n;
                d["frequency"] = e.frequency;
                out.append(d);
            }
            return out;
        })
        .def("similar", [](const charm::ModifierCatalog& c, const std::string& phrase, std::size_t k) {
            return scored(charm::similar(c, charm::TextEncoder(c.encoder_seed()), phrase, k));
        }, py::arg("phrase"), py::arg("k") = 3)
        .def("dissimilar", [](const charm::ModifierCatalog& c, const std::string& phrase, std::size_t k) {
            return scored(charm::dissimilar(c, charm::TextEncoder(c.encoder_seed()), phrase, k));
        }, py::arg("phrase"), py::arg("k") = 3);

    m.def("mine", [](const std::vector<std::string>& prompts, std::size_t min_freq, std::size_t top_k,
                     bool once_per_prompt, std::uint64_t encoder_seed) {
        charm::Corpus corpus;
        for (std::size_t i = 0; i < prompts.size(); ++i)
            corpus.push_back({static_cast<std::int64_t>(i), prompts[i], std::nullopt});
        return charm::mine(corpus, charm::TextEncoder(encoder_seed), {min_freq, top_k, once_per_prompt});
    }, py::arg("prompts"), py::arg("min_freq") = 2, py::arg("top_k") = 500, py::arg("once_per_prompt") = false,
       py::arg("encoder_seed") = 0);

    m.def("refine", [](const std::string& prompt, const charm::ModifierCatalog& catalog, std::size_t k_append) {
        charm::RefinerConfig cfg;
        cfg.k_append = k_append;
        return to_py(charm::to_json(charm::refine(prompt, catalog, charm::default_stopwords(), cfg)));
    }, py::arg("prompt"), py::arg("catalog"), py::arg("k_append") = 4);

    m.def("ssim", [](const Image& a, const Image& b) { return charm::ssim(from_array(a), from_array(b)); },
          py::arg("a"), py::arg("b"));

    m.def("encode_png", [](const Image& a) {
        const auto bytes = charm::encode_png(from_array(a));
        return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    });
    m.def("decode_png", [](const py::bytes& b) {
        const std::string s = b;
        return to_array(charm::decode_png(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size())));
    });

    py::class_<charm::Service>(m, "Service")
        .def(py::init([](const py::dict& config) {
            return std::make_unique<charm::Service>(charm::service_config_from_json(from_py(config)));
        }), py::arg("config") = py::dict())
        .def("start", &charm::Service::start, py::call_guard<py::gil_scoped_release>())
        .def("stop", &charm::Service::stop, py::call_guard<py::gil_scoped_release>())
        .def_property_readonly("port", &charm::Service::port)
        .def_property_readonly("running", &charm::Service::running);
}
