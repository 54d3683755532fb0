#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>

#include "rfml/nn/gradcheck.hpp"
#include "rfml/prompt/anchors.hpp"
#include "rfml/prompt/patchify.hpp"
#include "rfml/prompt/reprogram.hpp"
#include "rfml/prompt/template.hpp"
#include "test_util.hpp"

using namespace rfml;
using namespace rfml::prompt;
using rfml::signal::IQFrame;
using rfml::testutil::random_frame;

// --- prompt template --------------------------------------------------------

TEST(PromptText, ConstantFrameStats) {
    IQFrame f;
    f.i.assign(32, 0.5);
    f.q.assign(32, 0.5);
    auto st = frame_stats(f);
    EXPECT_EQ(st.trend, "flat");
    EXPECT_DOUBLE_EQ(st.min, st.max);
    EXPECT_DOUBLE_EQ(st.min, st.median);
}

TEST(PromptText, PeriodicToneTopLagContainsPeriod) {
    // Real tone: |r(l)| peaks at multiples of the period (a complex
    // exponential would decay monotonically, its period lives in the phase).
    IQFrame f;
    const std::size_t len = 64;
    for (std::size_t n = 0; n < len; ++n) {
        f.i.push_back(std::cos(2.0 * 3.14159265358979323846 * n / 8.0));
        f.q.push_back(0.0);
    }
    auto st = frame_stats(f);
    // Independent brute-force autocorrelation over every lag.
    std::vector<std::pair<double, std::size_t>> mags;
    for (std::size_t lag = 1; lag < len; ++lag) {
        std::complex<double> acc{0, 0};
        for (std::size_t n = 0; n + lag < len; ++n)
            acc += std::conj(std::complex<double>(f.i[n], f.q[n])) *
                   std::complex<double>(f.i[n + lag], f.q[n + lag]);
        mags.emplace_back(std::abs(acc), lag);
    }
    std::stable_sort(mags.begin(), mags.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<std::size_t> oracle;
    for (std::size_t k = 0; k < 5; ++k) oracle.push_back(mags[k].second);
    EXPECT_EQ(st.top_lags, oracle);
    EXPECT_NE(std::find(st.top_lags.begin(), st.top_lags.end(), 8u), st.top_lags.end());
}

TEST(PromptText, TemplateHasEachDelimiterOnce) {
    auto f = random_frame(32, 1);
    auto text = build_prompt_text("dataset info", "task info", f);
    auto count = [&](const std::string& needle) {
        std::size_t c = 0, at = 0;
        while ((at = text.find(needle, at)) != std::string::npos) {
            ++c;
            at += needle.size();
        }
        return c;
    };
    EXPECT_EQ(count(kDatasetDelimiter), 1u);
    EXPECT_EQ(count(kTaskDelimiter), 1u);
    EXPECT_EQ(count(kStatsDelimiter), 1u);
    EXPECT_THROW(build_prompt_text("", "task", f), InvalidArgument);
}

// --- tokenizer ---------------------------------------------------------------

TEST(Tokenizer, ByteSemantics) {
    auto toks = tokenize_bytes("a");
    ASSERT_EQ(toks.size(), 1u);
    EXPECT_EQ(toks[0], 97);
    const std::string text = "hello world";
    EXPECT_EQ(tokenize_bytes(text).size(), text.size());
    EXPECT_EQ(tokenize_bytes(text), tokenize_bytes(text));
    EXPECT_THROW(tokenize_bytes(""), InvalidArgument);
}

TEST(Tokenizer, EmbeddingLookupMatchesTableRow) {
    nn::ParamStore<double> store(3);
    auto table = make_anchor_table<double>(store, "anchors", kVocabSize, 8, 16);
    auto toks = tokenize_bytes("a");
    auto pt = nn::embedding_lookup(table.embeddings, toks, {1});
    for (std::size_t c = 0; c < 16; ++c)
        EXPECT_DOUBLE_EQ(pt->v[c], table.embeddings->v[97 * 16 + c]);
}

// --- anchors -----------------------------------------------------------------

TEST(Anchors, IdentityMixerReturnsEmbeddings) {
    // V' == V with M = I (constructed directly; the factory enforces V' < V).
    AnchorTable<double> t;
    t.embeddings = nn::make_tensor<double>({4, 3});
    Rng rng(4);
    for (auto& v : t.embeddings->v) v = rng.normal();
    t.mixer = nn::make_tensor<double>({4, 4});
    for (std::size_t i = 0; i < 4; ++i) t.mixer->at(i, i) = 1.0;
    auto e = t.derive_anchors();
    for (std::size_t i = 0; i < e->size(); ++i) EXPECT_DOUBLE_EQ(e->v[i], t.embeddings->v[i]);
}

TEST(Anchors, OneHotRowPicksEmbedding) {
    AnchorTable<double> t;
    t.embeddings = nn::make_tensor<double>({6, 4});
    Rng rng(5);
    for (auto& v : t.embeddings->v) v = rng.normal();
    t.mixer = nn::make_tensor<double>({2, 6});
    t.mixer->at(0, 3) = 1.0;
    t.mixer->at(1, 1) = 1.0;
    auto e = t.derive_anchors();
    for (std::size_t c = 0; c < 4; ++c) {
        EXPECT_DOUBLE_EQ(e->at(0, c), t.embeddings->at(3, c));
        EXPECT_DOUBLE_EQ(e->at(1, c), t.embeddings->at(1, c));
    }
}

TEST(Anchors, MatchesBruteForceMatmul) {
    nn::ParamStore<double> store(6);
    auto t = make_anchor_table<double>(store, "a", 10, 4, 5);
    auto e = t.derive_anchors();
    for (std::size_t j = 0; j < 4; ++j)
        for (std::size_t c = 0; c < 5; ++c) {
            double acc = 0;
            for (std::size_t v = 0; v < 10; ++v)
                acc += t.mixer->at(j, v) * t.embeddings->at(v, c);
            EXPECT_NEAR(e->at(j, c), acc, 1e-6);
        }
}

TEST(Anchors, NoZeroRowsAfterInit) {
    nn::ParamStore<double> store(7);
    auto t = make_anchor_table<double>(store, "a", kVocabSize, 64, 32);
    auto e = t.derive_anchors();
    for (std::size_t j = 0; j < 64; ++j) {
        double norm = 0;
        for (std::size_t c = 0; c < 32; ++c) norm += e->at(j, c) * e->at(j, c);
        EXPECT_GT(norm, 0.0);
    }
}

// --- cosine similarity ---------------------------------------------------------

TEST(Cosine, HandCases) {
    const std::vector<double> pt = {1, 0, 0,   // row 0
                                    0, 2, 0};  // row 1
    const std::vector<double> ep = {3, 0, 0,   // parallel to row 0
                                    0, 0, 5};  // orthogonal to both
    auto g = cosine_similarity(pt.data(), 2, ep.data(), 2, 3);
    EXPECT_NEAR(g[0 * 2 + 0], 1.0, 1e-12);
    EXPECT_NEAR(g[0 * 2 + 1], 0.0, 1e-12);
    EXPECT_NEAR(g[1 * 2 + 0], 0.0, 1e-12);
    EXPECT_NEAR(g[1 * 2 + 1], 0.0, 1e-12);
}

TEST(Cosine, ScaleInvariantAndZeroNormConvention) {
    Rng rng(8);
    std::vector<double> pt(3 * 4), ep(5 * 4);
    for (auto& v : pt) v = rng.normal();
    for (auto& v : ep) v = rng.normal();
    auto g1 = cosine_similarity(pt.data(), 3, ep.data(), 5, 4);
    auto scaled = pt;
    for (auto& v : scaled) v *= 2.0;
    auto g2 = cosine_similarity(scaled.data(), 3, ep.data(), 5, 4);
    for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_NEAR(g2[i], g1[i], 1e-6);

    std::fill(pt.begin(), pt.begin() + 4, 0.0);  // zero-norm prompt row
    auto g3 = cosine_similarity(pt.data(), 3, ep.data(), 5, 4);
    for (std::size_t j = 0; j < 5; ++j) EXPECT_DOUBLE_EQ(g3[j], 0.0);
}

// --- hybrid prompt selection ----------------------------------------------------

namespace {
// Exhaustive oracle: enumerate all L_T x V' similarities, max per anchor,
// sort anchors by (score desc, index asc), take K.
HybridSelection brute_force_select(const std::vector<double>& pt, std::size_t lt,
                                   const std::vector<double>& ep, std::size_t vp, std::size_t dim,
                                   std::size_t k) {
    auto gamma = cosine_similarity(pt.data(), lt, ep.data(), vp, dim);
    std::vector<std::pair<double, int>> scored;
    for (std::size_t j = 0; j < vp; ++j) {
        double best = -1e300;
        for (std::size_t i = 0; i < lt; ++i) best = std::max(best, gamma[i * vp + j]);
        scored.emplace_back(best, static_cast<int>(j));
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    HybridSelection sel;
    for (std::size_t r = 0; r < k; ++r) {
        sel.anchor_indices.push_back(scored[r].second);
        sel.scores.push_back(scored[r].first);
    }
    return sel;
}
}  // namespace

TEST(HybridPrompt, ExhaustiveCaseMatches) {
    // L_T=3, V'=4: all 12 similarities enumerated by hand oracle.
    const std::vector<double> pt = {1, 0, 0, 1, 1, 0, 0, 0, 1};
    const std::vector<double> ep = {2, 0, 0, 0, 3, 0, 1, 1, 1, 0, 0, -2};
    auto got = select_top_k(cosine_similarity(pt.data(), 3, ep.data(), 4, 3), 3, 4, 2);
    auto want = brute_force_select(pt, 3, ep, 4, 3, 2);
    EXPECT_EQ(got.anchor_indices, want.anchor_indices);
    for (std::size_t i = 0; i < got.scores.size(); ++i)
        EXPECT_DOUBLE_EQ(got.scores[i], want.scores[i]);
}

TEST(HybridPrompt, RandomInstancesMatchBruteForce) {
    Rng rng(9);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t lt = 1 + rng.below(8), vp = 1 + rng.below(16), dim = 2 + rng.below(6);
        std::vector<double> pt(lt * dim), ep(vp * dim);
        for (auto& v : pt) v = rng.normal();
        for (auto& v : ep) v = rng.normal();
        const std::size_t k = 1 + rng.below(vp);
        auto got = select_top_k(cosine_similarity(pt.data(), lt, ep.data(), vp, dim), lt, vp, k);
        auto want = brute_force_select(pt, lt, ep, vp, dim, k);
        ASSERT_EQ(got.anchor_indices, want.anchor_indices) << "trial " << trial;
        for (std::size_t i = 0; i < k; ++i) EXPECT_DOUBLE_EQ(got.scores[i], want.scores[i]);
        // Scores are sorted non-increasing and indices distinct.
        for (std::size_t i = 1; i < k; ++i) EXPECT_LE(got.scores[i], got.scores[i - 1]);
    }
}

TEST(HybridPrompt, ExactTokenMatchAlwaysSelected) {
    Rng rng(10);
    const std::size_t vp = 6, dim = 5;
    std::vector<double> ep(vp * dim);
    for (auto& v : ep) v = rng.normal();
    // One prompt token equal to anchor 4.
    std::vector<double> pt(2 * dim);
    for (std::size_t c = 0; c < dim; ++c) pt[c] = rng.normal();
    for (std::size_t c = 0; c < dim; ++c) pt[dim + c] = ep[4 * dim + c];
    for (std::size_t k = 1; k <= vp; ++k) {
        auto sel = select_top_k(cosine_similarity(pt.data(), 2, ep.data(), vp, dim), 2, vp, k);
        EXPECT_NE(std::find(sel.anchor_indices.begin(), sel.anchor_indices.end(), 4),
                  sel.anchor_indices.end());
    }
}

TEST(HybridPrompt, ScaleAndPermutationInvariance) {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t lt = 2 + rng.below(5), vp = 3 + rng.below(10), dim = 3 + rng.below(5);
        std::vector<double> pt(lt * dim), ep(vp * dim);
        for (auto& v : pt) v = rng.normal();
        for (auto& v : ep) v = rng.normal();
        const std::size_t k = 1 + rng.below(vp);
        auto base = select_top_k(cosine_similarity(pt.data(), lt, ep.data(), vp, dim), lt, vp, k);

        // Positive rescaling of prompt rows and anchor rows.
        auto pt2 = pt;
        auto ep2 = ep;
        for (std::size_t i = 0; i < lt; ++i) {
            const double s = 0.1 + rng.uniform() * 5.0;
            for (std::size_t c = 0; c < dim; ++c) pt2[i * dim + c] *= s;
        }
        for (std::size_t j = 0; j < vp; ++j) {
            const double s = 0.1 + rng.uniform() * 5.0;
            for (std::size_t c = 0; c < dim; ++c) ep2[j * dim + c] *= s;
        }
        auto scaled = select_top_k(cosine_similarity(pt2.data(), lt, ep2.data(), vp, dim), lt, vp, k);
        EXPECT_EQ(scaled.anchor_indices, base.anchor_indices);
        for (std::size_t i = 0; i < k; ++i) EXPECT_NEAR(scaled.scores[i], base.scores[i], 1e-6);

        // Prompt token permutation.
        std::vector<std::size_t> perm(lt);
        std::iota(perm.begin(), perm.end(), 0);
        rng.shuffle(perm.begin(), perm.end());
        std::vector<double> pt3(lt * dim);
        for (std::size_t i = 0; i < lt; ++i)
            std::copy_n(pt.data() + perm[i] * dim, dim, pt3.data() + i * dim);
        auto permuted = select_top_k(cosine_similarity(pt3.data(), lt, ep.data(), vp, dim), lt, vp, k);
        EXPECT_EQ(permuted.anchor_indices, base.anchor_indices);

        // Top-K nesting under the fixed tie-break.
        if (k < vp) {
            auto bigger =
                select_top_k(cosine_similarity(pt.data(), lt, ep.data(), vp, dim), lt, vp, k + 1);
            for (std::size_t i = 0; i < k; ++i)
                EXPECT_EQ(bigger.anchor_indices[i], base.anchor_indices[i]);
        }
    }
}

TEST(HybridPrompt, KValidation) {
    std::vector<double> gamma(4, 0.0);
    EXPECT_THROW(select_top_k(gamma, 1, 4, 5), InvalidArgument);
    EXPECT_THROW(select_top_k(gamma, 1, 4, 0), InvalidArgument);
    auto all = select_top_k(gamma, 1, 4, 4);
    EXPECT_EQ(all.anchor_indices, (std::vector<int>{0, 1, 2, 3}));
}

// --- patchify -------------------------------------------------------------------

TEST(Patchify, PatchCountArithmetic) {
    EXPECT_EQ(patch_count(128, 16, 16), 8u);
    EXPECT_EQ(patch_count(128, 16, 8), 15u);
    EXPECT_THROW(patch_count(8, 16, 16), InvalidArgument);
}

TEST(Patchify, IdentityProjectionReconstructsFrame) {
    // d_m = 2*patch_len with identity projection and zero positional rows.
    const std::size_t pl = 8, dm = 16;
    nn::ParamStore<double> store(12);
    auto pe = make_patch_embed<double>(store, "patch", pl, pl, 4, dm);
    std::fill(pe.proj->v.begin(), pe.proj->v.end(), 0.0);
    for (std::size_t i = 0; i < dm; ++i) pe.proj->at(i, i) = 1.0;
    std::fill(pe.bias->v.begin(), pe.bias->v.end(), 0.0);
    std::fill(pe.pos->v.begin(), pe.pos->v.end(), 0.0);

    auto f = random_frame(32, 13);
    auto x = patchify_and_embed(pe, {f});
    ASSERT_EQ(x->shape, (std::vector<std::size_t>{1, 4, 16}));
    for (std::size_t p = 0; p < 4; ++p)
        for (std::size_t n = 0; n < pl; ++n) {
            EXPECT_DOUBLE_EQ(x->v[p * dm + n], f.i[p * pl + n]);
            EXPECT_DOUBLE_EQ(x->v[p * dm + pl + n], f.q[p * pl + n]);
        }
}

// --- reprogramming ---------------------------------------------------------------

TEST(Reprogram, SingleAnchorMakesRowsIdentical) {
    nn::ParamStore<double> store(14);
    auto rp = make_reprogram<double>(store, "rp", 8, 8, 8, 2);
    auto anchors = nn::make_tensor<double>({1, 8});
    Rng rng(15);
    for (auto& v : anchors->v) v = rng.normal();
    auto x = nn::make_tensor<double>({2, 4, 8});
    for (auto& v : x->v) v = rng.normal();
    auto out = reprogram(rp, x, anchors);
    ASSERT_EQ(out->shape, (std::vector<std::size_t>{2, 4, 8}));
    for (std::size_t b = 0; b < 2; ++b)
        for (std::size_t t = 1; t < 4; ++t)
            for (std::size_t c = 0; c < 8; ++c)
                EXPECT_NEAR(out->v[(b * 4 + t) * 8 + c], out->v[b * 4 * 8 + c], 1e-12);
}

TEST(Reprogram, AttentionRowsSumToOne) {
    nn::ParamStore<double> store(16);
    auto rp = make_reprogram<double>(store, "rp", 8, 8, 8, 2);
    Rng rng(17);
    auto anchors = nn::make_tensor<double>({6, 8});
    for (auto& v : anchors->v) v = rng.normal();
    auto x = nn::make_tensor<double>({1, 4, 8});
    for (auto& v : x->v) v = rng.normal();
    auto res = reprogram_detailed(rp, x, anchors);
    for (std::size_t r = 0; r < res.weights->shape[0] * res.weights->shape[1]; ++r) {
        double s = 0;
        for (std::size_t c = 0; c < 6; ++c) s += res.weights->v[r * 6 + c];
        EXPECT_NEAR(s, 1.0, 1e-6);
    }
}

TEST(Reprogram, AnchorPermutationLeavesOutputInvariant) {
    nn::ParamStore<double> store(18);
    auto rp = make_reprogram<double>(store, "rp", 8, 8, 8, 2);
    Rng rng(19);
    auto anchors = nn::make_tensor<double>({6, 8});
    for (auto& v : anchors->v) v = rng.normal();
    auto x = nn::make_tensor<double>({1, 4, 8});
    for (auto& v : x->v) v = rng.normal();
    auto base = reprogram(rp, x, anchors);

    std::vector<std::size_t> perm(6);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm.begin(), perm.end());
    auto shuffled = nn::make_tensor<double>({6, 8});
    for (std::size_t j = 0; j < 6; ++j)
        std::copy_n(anchors->v.data() + perm[j] * 8, 8, shuffled->v.data() + j * 8);
    auto permuted = reprogram(rp, x, shuffled);
    for (std::size_t i = 0; i < base->size(); ++i) EXPECT_NEAR(permuted->v[i], base->v[i], 1e-9);
}

TEST(Reprogram, GradCheck) {
    nn::ParamStore<double> store(20);
    auto rp = make_reprogram<double>(store, "rp", 8, 8, 8, 2);
    Rng rng(21);
    auto anchors = nn::make_tensor<double>({6, 8});
    for (auto& v : anchors->v) v = rng.normal();
    anchors->requires_grad = true;
    auto x = nn::make_tensor<double>({1, 4, 8});
    for (auto& v : x->v) v = rng.normal();
    x->requires_grad = true;
    std::vector<nn::Ptr<double>> inputs = {x, anchors};
    for (const auto& [name, t] : store.entries()) inputs.push_back(t);
    auto rep = nn::grad_check([&] { return nn::sum_all(reprogram(rp, x, anchors)); }, inputs);
    EXPECT_LT(rep.max_rel_error, 1e-4);
}

TEST(Reprogram, DeterministicForward) {
    nn::ParamStore<double> store(22);
    auto rp = make_reprogram<double>(store, "rp", 8, 8, 8, 2);
    Rng rng(23);
    auto anchors = nn::make_tensor<double>({5, 8});
    for (auto& v : anchors->v) v = rng.normal();
    auto x = nn::make_tensor<double>({2, 3, 8});
    for (auto& v : x->v) v = rng.normal();
    auto a = reprogram(rp, x, anchors);
    auto b = reprogram(rp, x, anchors);
    EXPECT_EQ(a->v, b->v);
}
