#include <cstdint>
#include <cstring>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "glassgpt/checkpoint.hpp"
#include "glassgpt/model.hpp"
#include "support/synthetic.hpp"

using namespace glassgpt;
namespace gt = glassgpt::testing;

namespace {

/// Container bytes from a raw header string and data region.
std::string container(const std::string& header, const std::string& data) {
    std::string out(8, '\0');
    const std::uint64_t n = header.size();
    std::memcpy(out.data(), &n, 8);
    return out + header + data;
}

template <class T>
std::string raw_bytes(std::initializer_list<T> values) {
    std::string s(values.size() * sizeof(T), '\0');
    std::memcpy(s.data(), std::data(values), s.size());
    return s;
}

Checkpoint read_string(const std::string& bytes) {
    std::istringstream in(bytes);
    return read_checkpoint(in);
}

std::string checkpoint_error_of(const std::string& bytes, std::string* tensor = nullptr) {
    try {
        read_string(bytes);
    } catch (const checkpoint_error& e) {
        if (tensor) *tensor = e.tensor();
        return e.what();
    }
    return "";
}

std::string serialize(const TensorMap& m, const std::map<std::string, std::string>& meta = {}) {
    std::ostringstream out;
    write_checkpoint(out, m, meta);
    return out.str();
}

bool maps_bitwise_equal(const TensorMap& a, const TensorMap& b) {
    if (a.size() != b.size()) return false;
    for (const auto& [name, t] : a) {
        const auto it = b.find(name);
        if (it == b.end() || !bitwise_equal(t, it->second)) return false;
    }
    return true;
}

const TensorMap& full_size_tensors() {
    static const TensorMap m = gt::synthetic_gpt2_tensors(ModelConfig::gpt2_small());
    return m;
}

std::string load_error_of(TensorMap m) {
    try {
        load_model(std::move(m));
    } catch (const model_error& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST(ReadCheckpoint, HandBuiltTwoByTwo) {
    const auto ckpt = read_string(
        container(R"({"w":{"dtype":"F32","shape":[2,2],"data_offsets":[0,16]}})", raw_bytes<float>({1, 2, 3, 4})));
    ASSERT_EQ(ckpt.tensors.size(), 1u);
    const Tensor& w = ckpt.tensors.at("w");
    EXPECT_EQ(w.shape(), (Shape{2, 2}));
    EXPECT_EQ(w.values(), (std::vector<float>{1, 2, 3, 4}));
}

TEST(ReadCheckpoint, MetadataIsKept) {
    const auto ckpt = read_string(container(
        R"({"__metadata__":{"format":"pt"},"b":{"dtype":"F32","shape":[1],"data_offsets":[0,4]}})",
        raw_bytes<float>({7})));
    EXPECT_EQ(ckpt.index.metadata.at("format"), "pt");
    EXPECT_EQ(ckpt.tensors.at("b")[0], 7.0f);
}

TEST(ReadCheckpoint, HeaderLongerThanFile) {
    std::string bytes = container(R"({"w":{"dtype":"F32","shape":[1],"data_offsets":[0,4]}})", raw_bytes<float>({1}));
    const std::uint64_t bogus = 1 << 20;
    std::memcpy(bytes.data(), &bogus, 8);
    EXPECT_NE(checkpoint_error_of(bytes).find("truncated header"), std::string::npos);
    EXPECT_NE(checkpoint_error_of("abc").find("truncated header"), std::string::npos);
}

TEST(ReadCheckpoint, TruncatedDataNamesTensor) {
    TensorMap m;
    m.emplace("a", Tensor({3}, {1, 2, 3}));
    m.emplace("z.last", Tensor({2, 2}, {1, 2, 3, 4}));
    const std::string bytes = serialize(m);
    std::string tensor;
    const std::string err = checkpoint_error_of(bytes.substr(0, bytes.size() - 3), &tensor);
    EXPECT_EQ(tensor, "z.last") << err;
    EXPECT_NE(err.find("'z.last'"), std::string::npos) << err;
}

TEST(ReadCheckpoint, OffsetsOutOfBounds) {
    std::string tensor;
    const std::string err = checkpoint_error_of(
        container(R"({"w":{"dtype":"F32","shape":[2],"data_offsets":[4,12]}})", raw_bytes<float>({1, 2})), &tensor);
    EXPECT_NE(err.find("out of bounds"), std::string::npos) << err;
    EXPECT_EQ(tensor, "w");
}

TEST(ReadCheckpoint, OverlappingRegions) {
    std::string tensor;
    const std::string err = checkpoint_error_of(
        container(R"({"a":{"dtype":"F32","shape":[2],"data_offsets":[0,8]},)"
                  R"("b":{"dtype":"F32","shape":[2],"data_offsets":[4,12]}})",
                  raw_bytes<float>({1, 2, 3})),
        &tensor);
    EXPECT_NE(err.find("overlapping"), std::string::npos) << err;
    EXPECT_EQ(tensor, "b");
}

TEST(ReadCheckpoint, UnsupportedDtype) {
    std::string tensor;
    const std::string err = checkpoint_error_of(
        container(R"({"ids":{"dtype":"I64","shape":[1],"data_offsets":[0,8]}})", std::string(8, '\0')), &tensor);
    EXPECT_NE(err.find("unsupported dtype 'I64'"), std::string::npos) << err;
    EXPECT_EQ(tensor, "ids");
}

TEST(ReadCheckpoint, ByteLengthMustMatchShape) {
    const std::string err = checkpoint_error_of(
        container(R"({"w":{"dtype":"F32","shape":[3],"data_offsets":[0,8]}})", raw_bytes<float>({1, 2})));
    EXPECT_NE(err.find("'w'"), std::string::npos) << err;
}

TEST(ReadCheckpoint, GapsAndTrailingBytesAreRejected) {
    EXPECT_NE(checkpoint_error_of(container(R"({"w":{"dtype":"F32","shape":[1],"data_offsets":[4,8]}})",
                                            raw_bytes<float>({0, 1})))
                  .find("gap"),
              std::string::npos);
    EXPECT_NE(checkpoint_error_of(container(R"({"w":{"dtype":"F32","shape":[1],"data_offsets":[0,4]}})",
                                            raw_bytes<float>({0, 1})))
                  .find("trailing"),
              std::string::npos);
}

TEST(ReadCheckpoint, MalformedHeaderJson) {
    EXPECT_NE(checkpoint_error_of(container("{not json", "")).find("malformed header JSON"), std::string::npos);
}

TEST(ReadCheckpoint, SixteenBitSourcesAreWidened) {
    // 1.0, -2.0, 65504 (largest half), 2^-24 (smallest subnormal half)
    const auto half = read_string(container(R"({"h":{"dtype":"F16","shape":[4],"data_offsets":[0,8]}})",
                                            raw_bytes<std::uint16_t>({0x3C00, 0xC000, 0x7BFF, 0x0001})));
    EXPECT_EQ(half.tensors.at("h").values(), (std::vector<float>{1.0f, -2.0f, 65504.0f, 0x1p-24f}));
    // 1.0 and 3.140625 in bfloat16
    const auto bf = read_string(container(R"({"b":{"dtype":"BF16","shape":[2],"data_offsets":[0,4]}})",
                                          raw_bytes<std::uint16_t>({0x3F80, 0x4049})));
    EXPECT_EQ(bf.tensors.at("b").values(), (std::vector<float>{1.0f, 3.140625f}));
}

TEST(WriteCheckpoint, RoundTripIsBitwiseLossless) {
    const TensorMap m = gt::synthetic_gpt2_tensors(gt::tiny_config(), {7, true});
    const std::string bytes = serialize(m, {{"n_head", "2"}});
    const Checkpoint back = read_string(bytes);
    EXPECT_TRUE(maps_bitwise_equal(m, back.tensors));
    EXPECT_EQ(back.index.metadata.at("n_head"), "2");
    EXPECT_EQ(back.index.header_length % 8, 0u);
    EXPECT_EQ(serialize(back.tensors, {{"n_head", "2"}}), bytes);
}

TEST(WriteCheckpoint, SpecialValuesSurvive) {
    TensorMap m;
    m.emplace("v", Tensor({5}, {-0.0f, 1e-45f, 3.4028235e38f, -1.17549435e-38f, 0.1f}));
    const Checkpoint back = read_string(serialize(m));
    EXPECT_TRUE(bitwise_equal(back.tensors.at("v"), m.at("v")));
}

TEST(LoadModel, Gpt2SmallParameterCount) {
    TensorMap m = full_size_tensors();
    const ModelConfig cfg = infer_config(m, {{"n_head", "12"}});
    EXPECT_EQ(cfg, ModelConfig::gpt2_small());
    const Gpt2Model model = load_model(std::move(m), cfg);
    EXPECT_EQ(model.parameter_count(), 124439808u);
}

TEST(LoadModel, MissingTensorIsNamed) {
    TensorMap m = full_size_tensors();
    m.erase("h.7.mlp.c_fc.weight");
    EXPECT_NE(load_error_of(std::move(m)).find("missing tensor 'h.7.mlp.c_fc.weight'"), std::string::npos);
}

TEST(LoadModel, ShapeMismatchCitesExpected) {
    TensorMap m = full_size_tensors();
    m.at("h.0.attn.c_attn.weight") = Tensor({768, 768});
    const std::string err = load_error_of(std::move(m));
    EXPECT_NE(err.find("expected [768x2304]"), std::string::npos) << err;
    EXPECT_NE(err.find("found [768x768]"), std::string::npos) << err;
}

TEST(LoadModel, SeparateOutputProjectionIsRejected) {
    TensorMap m = gt::synthetic_gpt2_tensors(gt::tiny_config());
    m.emplace("lm_head.weight", Tensor({64, 16}));
    try {
        load_model(std::move(m), gt::tiny_config());
        FAIL();
    } catch (const model_error& e) {
        EXPECT_NE(std::string(e.what()).find("lm_head.weight"), std::string::npos);
    }
}

TEST(LoadModel, ExtraTensorsBecomeWarnings) {
    const ModelConfig cfg = gt::tiny_config();
    std::vector<std::string> warnings;
    load_model(gt::synthetic_gpt2_tensors(cfg, {1, true}), cfg, &warnings);
    EXPECT_EQ(warnings.size(), cfg.n_layer);
    EXPECT_NE(warnings.front().find("attn.bias"), std::string::npos);
}

TEST(LoadModel, TransformerPrefixIsAccepted) {
    const ModelConfig cfg = gt::tiny_config();
    TensorMap prefixed;
    for (auto& [name, t] : gt::synthetic_gpt2_tensors(cfg)) prefixed.emplace("transformer." + name, t);
    const Gpt2Model a = load_model(std::move(prefixed), cfg);
    const Gpt2Model b = gt::synthetic_model(cfg);
    EXPECT_TRUE(bitwise_equal(a.wte, b.wte));
    EXPECT_TRUE(bitwise_equal(a.blocks[1].w_fc, b.blocks[1].w_fc));
}

TEST(LoadModel, NoTransposeIsApplied) {
    const ModelConfig cfg = gt::tiny_config();
    const TensorMap m = gt::synthetic_gpt2_tensors(cfg);
    const Gpt2Model model = load_model(m, cfg);
    EXPECT_TRUE(bitwise_equal(model.blocks[0].w_qkv, m.at("h.0.attn.c_attn.weight")));
    EXPECT_EQ(model.blocks[0].w_out.shape(), (Shape{cfg.d_mlp, cfg.d_model}));
}

TEST(LoadModel, DeterministicAcrossRuns) {
    const ModelConfig cfg = gt::tiny_config();
    const std::string bytes = serialize(gt::synthetic_gpt2_tensors(cfg), {{"n_head", "2"}});
    const Checkpoint a = read_string(bytes), b = read_string(bytes);
    const Gpt2Model ma = load_model(a.tensors, infer_config(a.tensors, a.index.metadata));
    const Gpt2Model mb = load_model(b.tensors, infer_config(b.tensors, b.index.metadata));
    EXPECT_EQ(ma.config, cfg);
    EXPECT_TRUE(bitwise_equal(ma.blocks[1].w_qkv, mb.blocks[1].w_qkv));
    EXPECT_TRUE(bitwise_equal(ma.ln_f_beta, mb.ln_f_beta));
}
