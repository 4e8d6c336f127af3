#include "greenhouse/model_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "greenhouse/error.hpp"
#include "greenhouse/text.hpp"

namespace greenhouse {

namespace {

constexpr std::string_view kMagic = "greenhouse-model 1";

void write_values(std::ostream& out, std::span<const double> values) {
    out << "params " << values.size() << '\n';
    for (double v : values) out << format_g17(v) << '\n';
    out << "end\n";
}

class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    std::string line(std::string_view what) {
        std::string s;
        if (!std::getline(in_, s)) throw FormatError("model file truncated: expected " + std::string(what));
        ++line_no_;
        return std::string(trim(s));
    }

    /// Reads `key value` and returns the value part.
    std::string field(std::string_view key) {
        const std::string s = line(key);
        if (s.rfind(key, 0) != 0 || (s.size() > key.size() && s[key.size()] != ' ')) {
            throw FormatError("model file line " + std::to_string(line_no_) + ": expected '" + std::string(key) +
                              "', got '" + s + "'");
        }
        return s.size() > key.size() ? std::string(trim(std::string_view(s).substr(key.size() + 1))) : std::string{};
    }

    std::uint64_t count(std::string_view key) {
        const std::string v = field(key);
        const auto n = parse_int64(v);
        if (!n || *n < 0) throw FormatError("model file: bad " + std::string(key) + " '" + v + "'");
        return static_cast<std::uint64_t>(*n);
    }

    std::vector<double> values(std::size_t expected) {
        const std::uint64_t n = count("params");
        if (n != expected) {
            throw FormatError("model file: params count " + std::to_string(n) + " does not match dimensions (" +
                              std::to_string(expected) + ")");
        }
        std::vector<double> out;
        out.reserve(expected);
        for (std::size_t i = 0; i < expected; ++i) {
            const std::string s = line("parameter value");
            const auto v = parse_double(s);
            if (!v) throw FormatError("model file line " + std::to_string(line_no_) + ": bad number '" + s + "'");
            out.push_back(*v);
        }
        if (line("end marker") != "end") throw FormatError("model file: missing end marker");
        return out;
    }

private:
    std::istream& in_;
    std::size_t line_no_ = 0;
};

}  // namespace

void save_model(std::ostream& out, const AnyModel& model, const ModelMetadata& meta) {
    out << kMagic << '\n';
    if (const auto* svr = std::get_if<SvrModel>(&model)) {
        out << "kind svr\ninput_dim " << kLayers << '\n';
        out << "soil_label " << meta.soil_label << "\nseed " << meta.seed << "\nepochs " << meta.epochs << '\n';
        std::vector<double> flat(svr->w.begin(), svr->w.end());
        flat.push_back(svr->b);
        write_values(out, flat);
    } else {
        const auto& ann = std::get<AnnParams>(model);
        out << "kind ann\ninput_dim " << ann.input_dim() << "\nhidden_dim " << ann.hidden_dim() << '\n';
        out << "soil_label " << meta.soil_label << "\nseed " << meta.seed << "\nepochs " << meta.epochs << '\n';
        write_values(out, ann.values());
    }
}

std::string save_model_text(const AnyModel& model, const ModelMetadata& meta) {
    std::ostringstream out;
    save_model(out, model, meta);
    return out.str();
}

StoredModel load_model(std::istream& in) {
    Reader r(in);
    if (r.line("header") != kMagic) throw FormatError("not a greenhouse model file");
    const std::string kind = r.field("kind");
    if (kind != "svr" && kind != "ann") throw FormatError("unknown model kind '" + kind + "'");
    const std::uint64_t input_dim = r.count("input_dim");
    std::uint64_t hidden_dim = 0;
    if (kind == "ann") {
        hidden_dim = r.count("hidden_dim");
        if (input_dim == 0 || hidden_dim == 0 || input_dim > 4096 || hidden_dim > 4096) {
            throw FormatError("model file: implausible dimensions");
        }
    } else if (input_dim != kLayers) {
        throw FormatError("svr model must have input_dim " + std::to_string(kLayers));
    }
    ModelMetadata meta;
    meta.soil_label = r.field("soil_label");
    meta.seed = r.count("seed");
    meta.epochs = r.count("epochs");

    if (kind == "svr") {
        const auto v = r.values(kLayers + 1);
        SvrModel m;
        for (std::size_t i = 0; i < kLayers; ++i) m.w[i] = v[i];
        m.b = v[kLayers];
        return {m, meta};
    }
    AnnParams p(input_dim, hidden_dim);
    const auto v = r.values(p.size());
    std::copy(v.begin(), v.end(), p.values().begin());
    return {std::move(p), meta};
}

StoredModel load_model_text(const std::string& text) {
    std::istringstream in(text);
    return load_model(in);
}

StoredModel load_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open model file '" + path + "'");
    return load_model(in);
}

void save_model_file(const std::string& path, const AnyModel& model, const ModelMetadata& meta) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write model file '" + path + "'");
    save_model(out, model, meta);
}

double predict(const AnyModel& model, const Moisture& features) {
    if (const auto* svr = std::get_if<SvrModel>(&model)) return svr_predict(*svr, features);
    return ann_predict(std::get<AnnParams>(model), features);
}

MetricsReport evaluate(const AnyModel& model, std::span<const WindowedPair> pairs) {
    return std::visit([&](const auto& m) { return evaluate(m, pairs); }, model);
}

}  // namespace greenhouse
