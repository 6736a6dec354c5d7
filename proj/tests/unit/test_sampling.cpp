#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "rhm/dataset.hpp"
#include "rhm/sampling.hpp"
#include "support/brute_force.hpp"

namespace rhm {
namespace {

RhmParams params(std::uint32_t v, std::uint32_t m, std::uint32_t s, std::uint32_t L, std::optional<std::uint32_t> layer,
                 double a, std::uint64_t seed) {
    RhmParams p;
    p.v = v;
    p.m = m;
    p.s = s;
    p.L = L;
    p.zipf_layer = layer;
    p.zipf_exponent = a;
    p.seed = seed;
    return p;
}

TEST(Sampling, LabelIsUniform) {
    const auto g = build_grammar(params(2, 2, 2, 1, std::nullopt, 1.0, 1));
    Rng rng(10);
    const int n = 100000;
    int ones = 0;
    for (int i = 0; i < n; ++i) ones += sample_derivation(g, rng).label == 1;
    EXPECT_NEAR(ones / double(n), 0.5, 3.0 * std::sqrt(0.25 / n));
}

TEST(Sampling, RankFrequencyFollowsZipf) {
    const auto g = build_grammar(params(2, 2, 2, 1, 1, 1.0, 1));
    Rng rng(11);
    const int n = 100000;
    int first = 0;
    for (int i = 0; i < n; ++i) first += sample_derivation(g, rng).ranks[1][0] == 1;
    EXPECT_NEAR(first / double(n), 0.8, 3.0 * std::sqrt(0.8 * 0.2 / n));
}

TEST(Sampling, PerRankFrequenciesConverge) {
    const auto g = build_grammar(params(8, 6, 2, 3, 2, 1.0, 4));
    Rng rng(12);
    std::vector<double> count(7, 0.0);
    double total = 0.0;
    for (int i = 0; i < 20000; ++i) {
        const auto d = sample_derivation(g, rng);
        for (auto k : d.ranks[2]) {
            count[k] += 1.0;
            total += 1.0;
        }
    }
    for (std::uint32_t k = 1; k <= 6; ++k) {
        const double f = g.distribution(2).weight(k);
        EXPECT_LT(std::abs(count[k] / total - f), 4.0 * std::sqrt(f / total)) << "rank " << k;
    }
}

TEST(Sampling, DerivationsAreConsistent) {
    const auto g = build_grammar(params(6, 3, 3, 3, 1, 2.0, 5));
    Rng rng(13);
    for (int i = 0; i < 500; ++i) EXPECT_TRUE(derivation_consistent(g, sample_derivation(g, rng)));
}

TEST(Parsing, RoundTrip) {
    const auto g = build_grammar(params(8, 4, 2, 4, 2, 1.0, 6));
    Rng rng(14);
    for (int i = 0; i < 2000; ++i) {
        const auto d = sample_derivation(g, rng);
        auto parsed = parse_sequence(g, d.tokens());
        ASSERT_TRUE(parsed);
        EXPECT_EQ(*parsed, d);
    }
}

TEST(Parsing, UnreachableBottomTupleIsUnparseable) {
    const auto g = build_grammar(params(4, 2, 2, 2, std::nullopt, 1.0, 7));
    Rng rng(15);
    auto x = sample_derivation(g, rng).nodes[0];
    for (TupleCode code = 0; code < g.tuple_space(); ++code) {
        const auto t = g.decode(code);
        if (g.lookup(1, t)) continue;
        x[0] = t[0];
        x[1] = t[1];
        break;
    }
    EXPECT_FALSE(parse_sequence(g, x));
    EXPECT_THROW(parse_sequence(g, std::vector<Symbol>{0, 1}), ParameterError);
}

TEST(Parsing, ParseableSequencesAreExactlyTheDerivationLeaves) {
    const auto g = build_grammar(params(2, 2, 2, 2, std::nullopt, 1.0, 8));
    const auto all = testing::enumerate(g, true);
    std::set<std::vector<Symbol>> leaves;
    for (const auto& d : all.derivations) leaves.insert(d.nodes[0]);
    std::size_t parseable = 0;
    for (std::uint32_t bits = 0; bits < 16; ++bits) {
        std::vector<Symbol> x{bits >> 3 & 1u, bits >> 2 & 1u, bits >> 1 & 1u, bits & 1u};
        if (parse_sequence(g, x)) {
            ++parseable;
            EXPECT_TRUE(leaves.count(x));
        }
    }
    EXPECT_EQ(parseable, leaves.size());
    EXPECT_EQ(leaves.size(), 16u);  // m·v = v^s: every level is a bijection
}

TEST(SequenceLogProb, FullyUniform) {
    const auto g = build_grammar(params(4, 3, 3, 2, std::nullopt, 1.0, 9));
    Rng rng(16);
    const auto d = sample_derivation(g, rng);
    const auto r = sequence_log_prob(g, d.tokens(), d.label);
    EXPECT_EQ(r.outcome, SequenceOutcome::ok);
    EXPECT_NEAR(r.log_prob, -4.0 * std::log(3.0), 1e-12);
    const auto other = sequence_log_prob(g, d.tokens(), (d.label + 1) % 4);
    EXPECT_EQ(other.outcome, SequenceOutcome::root_mismatch);
    EXPECT_TRUE(std::isinf(other.log_prob));
}

TEST(SequenceLogProb, RankOneRule) {
    const auto g = build_grammar(params(2, 2, 2, 1, 1, 1.0, 10));
    const auto r = sequence_log_prob(g, g.rhs(1, 1, 1), 1);
    EXPECT_NEAR(r.log_prob, std::log(0.8), 1e-15);
}

TEST(SequenceLogProb, ZeroMassRuleIsDistinctOutcome) {
    const auto g = build_grammar(params(3, 2, 2, 1, 1, INFINITY, 10));
    EXPECT_EQ(sequence_log_prob(g, g.rhs(1, 0, 2), 0).outcome, SequenceOutcome::zero_probability);
    EXPECT_EQ(sequence_log_prob(g, g.rhs(1, 0, 1), 0).outcome, SequenceOutcome::ok);
}

TEST(SequenceLogProb, NormalizedOverAllSequences) {
    for (const auto& p : testing::small_instances()) {
        const auto g = build_grammar(p);
        const auto all = testing::enumerate(g, true);
        std::vector<double> per_label(p.v, 0.0);
        for (const auto& d : all.derivations) {
            const auto r = sequence_log_prob(g, d.tokens(), d.label);
            if (r.outcome == SequenceOutcome::ok) per_label[d.label] += std::exp(r.log_prob);
        }
        double joint = 0.0;
        for (double t : per_label) {
            EXPECT_NEAR(t, 1.0, 1e-9);
            joint += t / p.v;
        }
        EXPECT_NEAR(joint, 1.0, 1e-9);
    }
}

TEST(Dataset, DeterministicAcrossWorkers) {
    const auto g = build_grammar(params(8, 4, 2, 3, 1, 1.0, 3));
    EXPECT_EQ(sample_dataset(g, 500, 99, true, Split::train, 1), sample_dataset(g, 500, 99, true, Split::train, 4));
}

TEST(Dataset, JsonlRoundTrip) {
    const auto g = build_grammar(params(8, 4, 2, 3, 1, 1.0, 3));
    for (bool keep : {false, true}) {
        const auto ds = sample_dataset(g, 300, 5, keep, Split::test);
        std::stringstream buf;
        export_jsonl(ds, buf);
        EXPECT_EQ(ingest_jsonl(buf, &g), ds);
    }
}

TEST(Dataset, JsonlValidation) {
    const auto g = build_grammar(params(4, 2, 2, 2, std::nullopt, 1.0, 3));
    const auto ds = sample_dataset(g, 3, 5);
    std::stringstream buf;
    export_jsonl(ds, buf);
    std::string text = buf.str();
    const auto header_end = text.find('\n');
    const std::string header = text.substr(0, header_end + 1);

    std::stringstream big(header + "{\"tokens\":[0,1,2,4],\"label\":0}\n");
    EXPECT_THROW(ingest_jsonl(big), InvariantError);
    std::stringstream short_row(header + "{\"tokens\":[0,1],\"label\":0}\n");
    EXPECT_THROW(ingest_jsonl(short_row), InvariantError);
    std::stringstream no_header("{\"tokens\":[0,1,2,3],\"label\":0}\n");
    EXPECT_THROW(ingest_jsonl(no_header), SchemaError);

    auto other = g.params();
    other.seed = 4;
    const auto h = build_grammar(other);
    std::stringstream again(text);
    EXPECT_THROW(ingest_jsonl(again, &h), InvariantError);
}

TEST(Dataset, TensorFormat) {
    const auto g = build_grammar(params(5, 3, 2, 3, 1, 1.0, 3));
    const auto ds = sample_dataset(g, 40, 6);
    std::stringstream buf;
    export_tensor(ds, buf);
    const std::string bytes = buf.str();
    EXPECT_EQ(bytes.size(), tensor_header_bytes + 40u * 8u * 5u);
    EXPECT_EQ(bytes.substr(0, 4), "RHMT");

    std::stringstream in(bytes);
    const auto t = ingest_tensor(in);
    EXPECT_EQ(t.d, 8u);
    EXPECT_EQ(t.v, 5u);
    ASSERT_EQ(t.sequences.size(), 40u);
    for (std::size_t i = 0; i < 40; ++i) EXPECT_EQ(t.sequences[i], ds.samples[i].tokens);

    std::stringstream truncated(bytes.substr(0, bytes.size() - 1));
    EXPECT_THROW(ingest_tensor(truncated), SchemaError);
    std::string doubled = bytes;
    doubled[tensor_header_bytes + 1] = doubled[tensor_header_bytes] = 1;
    std::stringstream two_hot(doubled);
    EXPECT_THROW(ingest_tensor(two_hot), SchemaError);
}

TEST(Dataset, OneHotRowsSumToOne) {
    const std::vector<Symbol> x{0, 3, 2, 3};
    const auto h = one_hot(x, 4);
    for (std::size_t i = 0; i < 4; ++i) {
        int sum = 0;
        for (std::size_t c = 0; c < 4; ++c) sum += h[i * 4 + c];
        EXPECT_EQ(sum, 1);
        EXPECT_EQ(h[i * 4 + x[i]], 1);
    }
}

}  // namespace
}  // namespace rhm
