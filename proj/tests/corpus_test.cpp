#include <gtest/gtest.h>

#include <fstream>

#include "mdiag/corpus.hpp"
#include "test_util.hpp"

using namespace mdiag;

namespace {

DialoguePoint sample_point(const std::string& id, int label_id) {
    DialoguePoint p;
    p.id = id;
    p.question_text = "What is 3/4 + 1/4?";
    p.answer_options = {{"A", "1"}, {"B", "4/8"}, {"C", "2/4"}, {"D", "8"}};
    p.chosen_option = "B";
    p.dialogue = {{Speaker::tutor, "How did you get B?"},
                  {Speaker::student, "I added the tops and the bottoms."}};
    p.misconception_id = label_id;
    p.likelihood = 75;
    return p;
}

Corpus small_corpus() {
    Corpus c;
    c.catalog.intern("Adds the numerators and the denominators when adding fractions");
    c.catalog.intern("Believes multiplying two negatives gives a negative answer");
    c.catalog.intern("Rounds down at five when rounding to the nearest ten");
    c.points = {sample_point("p1", 0), sample_point("p2", 1), sample_point("p3", 2)};
    return c;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

}  // namespace

TEST(LabelCatalog, InternIsIdempotentAndWhitespaceInsensitive) {
    LabelCatalog cat;
    int a = cat.intern("Confuses  area and \t perimeter");
    int b = cat.intern("Confuses area and perimeter");
    EXPECT_EQ(a, b);
    EXPECT_EQ(cat.size(), 1);
    EXPECT_EQ(cat.text(a), "Confuses area and perimeter");
    EXPECT_THROW(cat.text(5), Error);
    EXPECT_FALSE(cat.find("something else").has_value());
}

TEST(CorpusIO, RoundTripsThroughJsonl) {
    testutil::TempDir tmp;
    Corpus c = small_corpus();
    save_corpus(c, tmp.file("corpus.jsonl"));
    Corpus back = load_corpus(tmp.file("corpus.jsonl"));
    ASSERT_EQ(back.points.size(), c.points.size());
    EXPECT_EQ(back.points, c.points);
    EXPECT_EQ(back.catalog.texts(), c.catalog.texts());
}

TEST(CorpusIO, AcceptsLabelIdRecordsResolvedAgainstWholeFile) {
    testutil::TempDir tmp;
    // first record references label id 1, which only the second record names
    std::string jsonl =
        R"({"id":"a","question":"q","options":[{"key":"A","text":"1"}],"chosen":"A","dialogue":[{"speaker":"student","text":"hi"}],"misconception_id":1,"likelihood":50})"
        "\n"
        R"({"id":"b","question":"q","options":[{"key":"A","text":"1"}],"chosen":"A","dialogue":[{"speaker":"student","text":"hi"}],"misconception":"label zero","likelihood":50})"
        "\n"
        R"({"id":"c","question":"q","options":[{"key":"A","text":"1"}],"chosen":"A","dialogue":[{"speaker":"student","text":"hi"}],"misconception":"label one","likelihood":50})"
        "\n";
    write_text(tmp.file("c.jsonl"), jsonl);
    Corpus c = load_corpus(tmp.file("c.jsonl"));
    EXPECT_EQ(c.points[0].misconception_id, 1);
    EXPECT_EQ(c.catalog.text(1), "label one");
}

TEST(CorpusIO, BaseCatalogPinsLabelIds) {
    testutil::TempDir tmp;
    LabelCatalog base;
    base.intern("first");
    base.intern("second");
    write_text(
        tmp.file("c.jsonl"),
        R"({"id":"a","question":"q","options":[{"key":"A","text":"1"}],"chosen":"A","dialogue":[{"speaker":"student","text":"hi"}],"misconception":"second","likelihood":0})"
        "\n");
    Corpus c = load_corpus(tmp.file("c.jsonl"), &base);
    EXPECT_EQ(c.points[0].misconception_id, 1);

    write_text(
        tmp.file("bad.jsonl"),
        R"({"id":"a","question":"q","options":[{"key":"A","text":"1"}],"chosen":"A","dialogue":[{"speaker":"student","text":"hi"}],"misconception":"third","likelihood":0})"
        "\n");
    try {
        load_corpus(tmp.file("bad.jsonl"), &base);
        FAIL() << "expected unknown-label error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("third"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos);
    }
}

TEST(CorpusIO, ErrorsCarryLineNumbers) {
    testutil::TempDir tmp;
    write_text(tmp.file("c.jsonl"),
               R"({"id":"ok","question":"q","options":[{"key":"A","text":"1"}],"chosen":"A","dialogue":[{"speaker":"student","text":"hi"}],"misconception":"x","likelihood":0})"
               "\n"
               "not json\n");
    try {
        load_corpus(tmp.file("c.jsonl"));
        FAIL() << "expected parse error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
}

TEST(CorpusValidation, RejectsBrokenPoints) {
    LabelCatalog cat;
    cat.intern("label");

    DialoguePoint p = sample_point("p", 0);
    p.chosen_option = "Z";
    EXPECT_THROW(detail::validate_point(p, cat), Error);

    p = sample_point("p", 0);
    p.dialogue.clear();
    EXPECT_THROW(detail::validate_point(p, cat), Error);

    p = sample_point("p", 0);
    p.dialogue = {{Speaker::tutor, "alone"}};
    EXPECT_THROW(detail::validate_point(p, cat), Error);

    p = sample_point("p", 0);
    p.likelihood = 60;
    EXPECT_THROW(detail::validate_point(p, cat), Error);

    p = sample_point("p", 0);
    p.misconception_id = 7;
    EXPECT_THROW(detail::validate_point(p, cat), Error);
}

TEST(Likelihood, FilterKeepsThresholdAndAbove) {
    auto points = small_corpus().points;
    points[0].likelihood = 0;
    points[1].likelihood = 75;
    points[2].likelihood = 100;
    auto kept = filter_by_likelihood(points, 75);
    ASSERT_EQ(kept.size(), 2u);
    EXPECT_EQ(kept[0].id, "p2");
    EXPECT_EQ(kept[1].id, "p3");
    EXPECT_THROW(filter_by_likelihood(points, 60), Error);
}

TEST(Split, TenSingletonLabelsGive7_1_2) {
    // equal group sizes: the greedy max-deficit rule fills train to 7,
    // valid to 1, test to 2 no matter how the shuffle lands
    Corpus c;
    std::vector<DialoguePoint> points;
    for (int i = 0; i < 10; ++i) {
        c.catalog.intern("label " + std::to_string(i));
        points.push_back(sample_point("p" + std::to_string(i), i));
    }
    for (uint64_t seed : {0ULL, 1ULL, 42ULL, 999ULL}) {
        SplitAssignment s = split_by_misconception(points, c.catalog, SplitFractions{}, seed);
        EXPECT_EQ(s.train.size(), 7u) << "seed " << seed;
        EXPECT_EQ(s.valid.size(), 1u) << "seed " << seed;
        EXPECT_EQ(s.test.size(), 2u) << "seed " << seed;
    }
}

TEST(Split, DeterministicAndSeedSensitive) {
    Corpus c = generate_synthetic_corpus(80, 20, 7);
    SplitAssignment a = split_by_misconception(c.points, c.catalog, SplitFractions{}, 3);
    SplitAssignment b = split_by_misconception(c.points, c.catalog, SplitFractions{}, 3);
    EXPECT_EQ(a, b);
    bool any_differs = false;
    for (uint64_t seed = 4; seed < 14 && !any_differs; ++seed) {
        SplitAssignment other = split_by_misconception(c.points, c.catalog, SplitFractions{}, seed);
        any_differs = !(other == a);
    }
    EXPECT_TRUE(any_differs);
}

TEST(Split, RejectsBadInputs) {
    Corpus c = small_corpus();
    EXPECT_THROW(
        split_by_misconception(c.points, c.catalog, SplitFractions{0.5, 0.1, 0.2}, 0), Error);
    EXPECT_THROW(split_by_misconception({}, c.catalog, SplitFractions{}, 0), Error);

    Corpus two;
    two.catalog.intern("a");
    two.catalog.intern("b");
    std::vector<DialoguePoint> pts = {sample_point("p1", 0), sample_point("p2", 1)};
    EXPECT_THROW(split_by_misconception(pts, two.catalog, SplitFractions{}, 0), Error);
}

TEST(Split, FileRoundTrip) {
    testutil::TempDir tmp;
    Corpus c = generate_synthetic_corpus(40, 10, 5);
    SplitAssignment s = split_by_misconception(c.points, c.catalog, SplitFractions{}, 5);
    save_split(s, tmp.file("split.json"));
    EXPECT_EQ(load_split(tmp.file("split.json")), s);
}

TEST(Synthetic, DeterministicAndValid) {
    Corpus a = generate_synthetic_corpus(60, 15, 11, 0.3);
    Corpus b = generate_synthetic_corpus(60, 15, 11, 0.3);
    ASSERT_EQ(a.points.size(), 60u);
    EXPECT_EQ(a.points, b.points);
    EXPECT_EQ(a.catalog.size(), 15);
    for (const auto& p : a.points) {
        EXPECT_NO_THROW(detail::validate_point(p, a.catalog));
    }
}

TEST(Synthetic, EveryLabelKeepsAHighLikelihoodPoint) {
    Corpus c = generate_synthetic_corpus(50, 12, 3);
    for (int l = 0; l < 12; ++l) {
        EXPECT_EQ(c.points[static_cast<size_t>(l)].misconception_id, l);
        EXPECT_GE(c.points[static_cast<size_t>(l)].likelihood, 75);
    }
}

TEST(Synthetic, NoiseZeroEchoesTheLabelText) {
    Corpus c = generate_synthetic_corpus(20, 5, 9, 0.0);
    const auto& p = c.points[0];
    const std::string truth = c.catalog.text(p.misconception_id);
    auto truth_tokens = detail::tokenize_alnum(truth);
    std::string flat;
    for (size_t i = 0; i < truth_tokens.size(); ++i) {
        if (i) flat += ' ';
        flat += truth_tokens[i];
    }
    EXPECT_NE(p.dialogue[1].text.find(flat), std::string::npos)
        << "student turn should quote the label verbatim at noise 0";
}

TEST(Synthetic, RejectsBadParameters) {
    EXPECT_THROW(generate_synthetic_corpus(5, 2, 0), Error);
    EXPECT_THROW(generate_synthetic_corpus(3, 5, 0), Error);
    EXPECT_THROW(generate_synthetic_corpus(10, 5, 0, 1.5), Error);
}

TEST(LoadCorpus, EmptyFileYieldsEmptyCorpus) {
    testutil::TempDir tmp;
    atomic_write_file(tmp.file("empty.jsonl"), "");
    Corpus c = load_corpus(tmp.file("empty.jsonl"));
    EXPECT_TRUE(c.points.empty());
    EXPECT_TRUE(c.catalog.empty());
}

TEST(FilterByLikelihood, ZeroThresholdIsIdentity) {
    Corpus c = generate_synthetic_corpus(20, 5, 9);
    auto kept = filter_by_likelihood(c.points, 0);
    ASSERT_EQ(kept.size(), c.points.size());
    for (size_t i = 0; i < kept.size(); ++i) EXPECT_EQ(kept[i].id, c.points[i].id);
    EXPECT_TRUE(filter_by_likelihood({}, 75).empty());
}

TEST(Split, EveryPointFollowsItsLabelIntoExactlyOneSplit) {
    Corpus c = generate_synthetic_corpus(40, 8, 3);
    SplitAssignment s = split_by_misconception(c.points, c.catalog, SplitFractions{}, 12);
    for (const auto& p : c.points) {
        int hits = static_cast<int>(s.train.count(p.misconception_id)) +
                   static_cast<int>(s.valid.count(p.misconception_id)) +
                   static_cast<int>(s.test.count(p.misconception_id));
        ASSERT_EQ(hits, 1) << p.id;
    }
}
