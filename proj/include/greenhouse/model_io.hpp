#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>

#include "greenhouse/ann.hpp"
#include "greenhouse/svr.hpp"

namespace greenhouse {

using AnyModel = std::variant<SvrModel, AnnParams>;

struct ModelMetadata {
    std::string soil_label;
    std::uint64_t seed = 0;
    std::size_t epochs = 0;

    bool operator==(const ModelMetadata&) const = default;
};

struct StoredModel {
    AnyModel model;
    ModelMetadata metadata;
};

/// Plain-text model record:
///
///   greenhouse-model 1
///   kind ann                 (or svr)
///   input_dim 4
///   hidden_dim 4             (ann only)
///   soil_label Soil1
///   seed 42
///   epochs 20
///   params 25
///   <one value per line, %.17g, flat layout of AnnParams or w0..w3 b>
///   end
///
/// Values print with 17 significant digits, so load(save(m)) is bit-exact.
void save_model(std::ostream& out, const AnyModel& model, const ModelMetadata& metadata);
std::string save_model_text(const AnyModel& model, const ModelMetadata& metadata);

/// Throws FormatError on malformed, truncated or unknown-kind input.
StoredModel load_model(std::istream& in);
StoredModel load_model_text(const std::string& text);

StoredModel load_model_file(const std::string& path);
void save_model_file(const std::string& path, const AnyModel& model, const ModelMetadata& metadata);

/// Prediction for either model kind; features are the four layer readings.
double predict(const AnyModel& model, const Moisture& features);
MetricsReport evaluate(const AnyModel& model, std::span<const WindowedPair> pairs);

}  // namespace greenhouse
