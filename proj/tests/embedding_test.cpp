#include <gtest/gtest.h>

#include <cmath>

#include "mdiag/embed_client.hpp"
#include "mdiag/embedding.hpp"

using namespace mdiag;

TEST(Cosine, MatchesHandComputedValue) {
    EmbeddingVector a{{1.0, 2.0, 3.0}};
    EmbeddingVector b{{4.0, 5.0, 6.0}};
    // 32 / sqrt(14 * 77)
    EXPECT_NEAR(cosine_similarity(a, b), 32.0 / std::sqrt(1078.0), 1e-12);
    EXPECT_NEAR(cosine_similarity(a, a), 1.0, 1e-12);
}

TEST(Cosine, RejectsDegenerateInputs) {
    EmbeddingVector a{{1.0, 2.0}};
    EmbeddingVector b{{1.0, 2.0, 3.0}};
    EXPECT_THROW(cosine_similarity(a, b), Error);
    EmbeddingVector zero{{0.0, 0.0}};
    EXPECT_THROW(cosine_similarity(a, zero), Error);
}

TEST(Cosine, OppositeVectorsScoreMinusOne) {
    EmbeddingVector a{{2.0, -1.0, 0.5}};
    EmbeddingVector b{{-2.0, 1.0, -0.5}};
    EXPECT_NEAR(cosine_similarity(a, b), -1.0, 1e-12);
}

TEST(EmbeddingVector, NormalizeMakesUnitLength) {
    EmbeddingVector v{{3.0, 4.0}};
    v.normalize();
    EXPECT_NEAR(v.norm(), 1.0, 1e-12);
    EXPECT_NEAR(v.values[0], 0.6, 1e-12);
    EmbeddingVector zero{{0.0}};
    EXPECT_THROW(zero.normalize(), Error);
}

TEST(HashEmbed, DeterministicUnitVectors) {
    auto a = hash_embed("the student adds numerators", 64, 2);
    auto b = hash_embed("the student adds numerators", 64, 2);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.dim(), 64u);
    EXPECT_NEAR(a.norm(), 1.0, 1e-12);
}

TEST(HashEmbed, CaseAndPunctuationInsensitive) {
    auto a = hash_embed("Adds, the Numerators!", 64, 1);
    auto b = hash_embed("adds the numerators", 64, 1);
    EXPECT_EQ(a, b);
}

TEST(HashEmbed, NgramOrderMatters) {
    // same unigrams, different bigrams
    auto ab = hash_embed("alpha beta", 256, 2);
    auto ba = hash_embed("beta alpha", 256, 2);
    EXPECT_NE(ab, ba);
    auto ab1 = hash_embed("alpha beta", 256, 1);
    auto ba1 = hash_embed("beta alpha", 256, 1);
    EXPECT_EQ(ab1, ba1);
}

TEST(HashEmbed, RejectsBadArguments) {
    EXPECT_THROW(hash_embed("text", 4, 2), Error);
    EXPECT_THROW(hash_embed("text", 64, 0), Error);
    EXPECT_THROW(hash_embed("", 64, 2), Error);
    EXPECT_THROW(hash_embed("!!! ...", 64, 2), Error);  // no alnum tokens
}

TEST(EmbedderSpec, FingerprintsNameTheVectorSpace) {
    EmbedderSpec local = EmbedderSpec::hash_local_default();
    EXPECT_EQ(local.fingerprint(), "hash_local:dim=256:ngram=2");
    EmbedderSpec remote = EmbedderSpec::remote_default();
    EXPECT_EQ(remote.fingerprint(), "remote_api:model=MiniLM-L6-v2:dim=384");
    EXPECT_EQ(embedder_backend_from_name("hash_local"), EmbedderBackend::hash_local);
    EXPECT_THROW(embedder_backend_from_name("nope"), Error);
}

TEST(EmbedBatch, LocalBatchingIsTransparent) {
    EmbedderSpec spec;
    std::vector<std::string> texts = {"divides by ten", "multiplies by ten",
                                      "rounds toward zero"};
    auto batch = embed_batch(texts, spec);
    ASSERT_EQ(batch.size(), texts.size());
    for (size_t i = 0; i < texts.size(); ++i) {
        EXPECT_EQ(batch[i].values, embed_one(texts[i], spec).values) << texts[i];
    }
}
