#include "linkagent/channel_env.hpp"
#include "linkagent/coding.hpp"
#include "linkagent/error.hpp"
#include "linkagent/link.hpp"
#include "linkagent/mimo.hpp"
#include "linkagent/modulation.hpp"
#include "linkagent/rng.hpp"

#include <doctest.h>

#include <bitset>
#include <cmath>
#include <limits>
#include <string>

using namespace linkagent;

namespace {

Bits bytes_to_bits(const std::string& s)
{
    Bits out;
    for (unsigned char c : s) {
        for (int i = 7; i >= 0; --i) {
            out.push_back((c >> i) & 1U);
        }
    }
    return out;
}

Bits random_bits(Rng& rng, std::size_t n)
{
    Bits b(n);
    for (auto& x : b) {
        x = static_cast<std::uint8_t>(rng.below(2));
    }
    return b;
}

std::vector<double> hard_llrs(const Bits& coded)
{
    std::vector<double> l(coded.size());
    for (std::size_t i = 0; i < coded.size(); ++i) {
        l[i] = coded[i] ? -1.0 : 1.0;
    }
    return l;
}

double q_function(double x)
{
    return 0.5 * std::erfc(x / std::sqrt(2.0));
}

ScenarioSpec spec(int ntx, int nrx, double snr, int blocks, double rho)
{
    ScenarioSpec s;
    s.n_tx = ntx;
    s.n_rx = nrx;
    s.snr_db = snr;
    s.n_blocks = blocks;
    s.block_correlation = rho;
    s.scenario_id = "t";
    return s;
}

const std::pair<Coding, CodeRate> kSchemes[] = {
    {Coding::uncoded, CodeRate::r1},   {Coding::repetition3, CodeRate::r1_3},
    {Coding::conv_k7, CodeRate::r1_2}, {Coding::conv_k7, CodeRate::r2_3},
    {Coding::conv_k7, CodeRate::r3_4},
};

} // namespace

TEST_SUITE("crc")
{
    TEST_CASE("check value of the ASCII digits")
    {
        CHECK(crc16(bytes_to_bits("123456789")) == 0x29B1);
    }

    TEST_CASE("empty payload gives the init value")
    {
        CHECK(crc16(Bits{}) == 0xFFFF);
    }

    TEST_CASE("any single-bit change alters the checksum")
    {
        Rng rng(11);
        for (int t = 0; t < 1000; ++t) {
            Bits b = random_bits(rng, 1 + rng.below(400));
            const auto c = crc16(b);
            b[rng.below(b.size())] ^= 1U;
            CHECK(crc16(b) != c);
        }
    }

    TEST_CASE("append and check")
    {
        Rng rng(12);
        Bits framed = append_crc(random_bits(rng, 288));
        CHECK(framed.size() == 304);
        CHECK(check_crc(framed));
        framed[5] ^= 1U;
        CHECK_FALSE(check_crc(framed));
    }
}

TEST_SUITE("coding")
{
    TEST_CASE("repetition3 repeats every bit")
    {
        const Bits in{1, 0, 1};
        CHECK(encode(in, Coding::repetition3, CodeRate::r1_3) == Bits{1, 1, 1, 0, 0, 0, 1, 1, 1});
    }

    TEST_CASE("all-zero input gives the all-zero convolutional codeword")
    {
        const Bits zeros(100, 0);
        for (auto r : {CodeRate::r1_2, CodeRate::r2_3, CodeRate::r3_4}) {
            const Bits c = encode(zeros, Coding::conv_k7, r);
            CHECK(c.size() == coded_length(100, Coding::conv_k7, r));
            CHECK(std::all_of(c.begin(), c.end(), [](auto b) { return b == 0; }));
        }
    }

    TEST_CASE("coded lengths")
    {
        CHECK(coded_length(100, Coding::uncoded, CodeRate::r1) == 100);
        CHECK(coded_length(100, Coding::repetition3, CodeRate::r1_3) == 300);
        CHECK(coded_length(100, Coding::conv_k7, CodeRate::r1_2) == 212);
        // 212 mother bits punctured with keep patterns 1110 and 111001
        CHECK(coded_length(100, Coding::conv_k7, CodeRate::r2_3) == 159);
        CHECK(coded_length(100, Coding::conv_k7, CodeRate::r3_4) == 142);
    }

    TEST_CASE("mismatched coding and rate is rejected")
    {
        const Bits in{1, 0};
        CHECK_THROWS_AS(encode(in, Coding::uncoded, CodeRate::r3_4), InvariantError);
        CHECK_THROWS_AS(encode(in, Coding::conv_k7, CodeRate::r1_3), InvariantError);
        const std::vector<double> llrs(5, 1.0);
        CHECK_THROWS_AS(decode(llrs, 2, Coding::conv_k7, CodeRate::r1_2), std::invalid_argument);
    }

    TEST_CASE("noiseless round trip, all schemes")
    {
        Rng rng(21);
        for (const auto& [c, r] : kSchemes) {
            for (int t = 0; t < 20; ++t) {
                const Bits info = random_bits(rng, 1 + rng.below(300));
                const Bits coded = encode(info, c, r);
                CHECK(decode(hard_llrs(coded), info.size(), c, r) == info);
            }
        }
    }

    TEST_CASE("free distance of the K=7 (171,133) code is 10")
    {
        // Exhaustive over every nonzero input of up to 12 bits. Any error event of
        // the terminated code is covered, since low-weight paths merge quickly.
        std::size_t dmin = std::numeric_limits<std::size_t>::max();
        for (unsigned v = 1; v < (1U << 12); ++v) {
            Bits info(12);
            for (int i = 0; i < 12; ++i) {
                info[i] = (v >> i) & 1U;
            }
            const Bits c = encode(info, Coding::conv_k7, CodeRate::r1_2);
            dmin = std::min<std::size_t>(dmin, std::count(c.begin(), c.end(), 1));
        }
        CHECK(dmin == 10);
    }

    TEST_CASE("soft Viterbi corrects up to four hard errors at rate 1/2")
    {
        Rng rng(22);
        for (int t = 0; t < 200; ++t) {
            const Bits info = random_bits(rng, 100);
            Bits coded = encode(info, Coding::conv_k7, CodeRate::r1_2);
            for (int e = 0; e < 4; ++e) {
                coded[rng.below(coded.size())] ^= 1U;
            }
            CHECK(decode(hard_llrs(coded), info.size(), Coding::conv_k7, CodeRate::r1_2) == info);
        }
    }

    TEST_CASE("punctured codes still correct a single error")
    {
        Rng rng(23);
        for (auto r : {CodeRate::r2_3, CodeRate::r3_4}) {
            for (int t = 0; t < 100; ++t) {
                const Bits info = random_bits(rng, 120);
                Bits coded = encode(info, Coding::conv_k7, r);
                coded[rng.below(coded.size())] ^= 1U;
                CHECK(decode(hard_llrs(coded), info.size(), Coding::conv_k7, r) == info);
            }
        }
    }

    TEST_CASE("repetition majority vote")
    {
        const Bits coded{1, 0, 1, 0, 0, 1};
        CHECK(decode(hard_llrs(coded), 2, Coding::repetition3, CodeRate::r1_3) == Bits{1, 0});
    }
}

TEST_SUITE("modulation")
{
    TEST_CASE("unit average energy and point count")
    {
        for (auto m : kAllModulations) {
            const auto& c = constellation(m);
            const auto& pts = c.points();
            CHECK(pts.size() == (std::size_t{1} << bits_per_symbol(m)));
            double e = 0.0;
            for (auto p : pts) {
                e += std::norm(p);
            }
            CHECK(e / pts.size() == doctest::Approx(1.0).epsilon(1e-12));
        }
    }

    TEST_CASE("nearest neighbours differ in exactly one bit")
    {
        for (auto m : {Modulation::qpsk, Modulation::qam16, Modulation::qam64, Modulation::qam256}) {
            const auto& pts = constellation(m).points();
            double dmin = 1e9;
            for (std::size_t i = 0; i < pts.size(); ++i) {
                for (std::size_t j = i + 1; j < pts.size(); ++j) {
                    dmin = std::min(dmin, std::abs(pts[i] - pts[j]));
                }
            }
            for (std::size_t i = 0; i < pts.size(); ++i) {
                for (std::size_t j = i + 1; j < pts.size(); ++j) {
                    if (std::abs(pts[i] - pts[j]) < dmin * 1.001) {
                        CHECK(std::bitset<8>(i ^ j).count() == 1);
                    }
                }
            }
        }
    }

    TEST_CASE("per-axis Gray levels")
    {
        const double s = 1.0 / std::sqrt(10.0);
        const auto& pts = constellation(Modulation::qam16).points();
        // I bits 00 01 11 10 -> -3 -1 +1 +3, Q bits 00 -> -3
        CHECK(pts[0b0000].real() == doctest::Approx(-3 * s));
        CHECK(pts[0b0100].real() == doctest::Approx(-1 * s));
        CHECK(pts[0b1100].real() == doctest::Approx(1 * s));
        CHECK(pts[0b1000].real() == doctest::Approx(3 * s));
        CHECK(pts[0b0010].imag() == doctest::Approx(3 * s));
        CHECK(constellation(Modulation::bpsk).points()[0] == Symbol(-1.0, 0.0));
    }

    TEST_CASE("max-log LLRs match brute-force search")
    {
        Rng rng(31);
        for (auto m : kAllModulations) {
            const auto& c = constellation(m);
            const int k = c.bits_per_symbol();
            for (int t = 0; t < 50; ++t) {
                const Symbol y(rng.gaussian(), rng.gaussian());
                const double nv = 0.05 + rng.uniform();
                std::vector<double> got;
                c.demap_symbol(y, nv, got);
                REQUIRE(got.size() == static_cast<std::size_t>(k));
                for (int b = 0; b < k; ++b) {
                    double d0 = 1e300, d1 = 1e300;
                    for (std::size_t idx = 0; idx < c.points().size(); ++idx) {
                        const double d = std::norm(y - c.points()[idx]);
                        const bool one = (idx >> (k - 1 - b)) & 1U;
                        (one ? d1 : d0) = std::min(one ? d1 : d0, d);
                    }
                    CHECK(got[b] == doctest::Approx((d1 - d0) / nv).epsilon(1e-9));
                }
            }
        }
    }

    TEST_CASE("noiseless demodulation recovers bits")
    {
        Rng rng(32);
        for (auto m : kAllModulations) {
            const auto& c = constellation(m);
            const Bits bits = random_bits(rng, c.bits_per_symbol() * 64);
            const auto syms = c.modulate(bits);
            const std::vector<double> nv{0.1};
            const auto llr = c.demodulate_llr(syms, nv);
            REQUIRE(llr.size() == bits.size());
            for (std::size_t i = 0; i < bits.size(); ++i) {
                CHECK((llr[i] < 0) == (bits[i] == 1));
            }
        }
    }
}

TEST_SUITE("mimo")
{
    TEST_CASE("power levels")
    {
        CHECK(p_extra_nats(0) == 0.0);
        CHECK(p_extra_nats(3) == doctest::Approx(0.6907755279));
        CHECK(p_extra_nats(-3) == doctest::Approx(-0.6907755279));
        CHECK(p_extra_nats(6) == doctest::Approx(0.6 * std::log(10.0)));
        CMatrix x = CMatrix::Ones(2, 3);
        const auto p = apply_power(x, 3);
        CHECK(p.tx_power_linear == doctest::Approx(std::pow(10.0, 0.3)));
        CHECK(p.p_extra == doctest::Approx(std::log(p.tx_power_linear)));
        CHECK(p.vectors(0, 0).real() == doctest::Approx(std::sqrt(p.tx_power_linear)));
    }

    TEST_CASE("precoders radiate unit power")
    {
        for (std::uint64_t seed = 0; seed < 30; ++seed) {
            const auto cs = generate_channel(spec(2, 2, 10, 1, 1.0), seed);
            for (auto p : kAllPrecodings) {
                const CMatrix f = precoder_matrix(p, cs.h[0]);
                CHECK(f.squaredNorm() == doctest::Approx(1.0).epsilon(1e-12));
                CHECK(f.cols() == stream_count(p, 2, 2));
            }
            const CMatrix f = precoder_matrix(Precoding::svd_full, cs.h[0]);
            const CMatrix g = f.adjoint() * f * 2.0;
            CHECK((g - CMatrix::Identity(2, 2)).norm() < 1e-9);
        }
    }

    TEST_CASE("rank-1 beam on a diagonal channel")
    {
        CMatrix h = CMatrix::Zero(2, 2);
        h(0, 0) = 2.0;
        h(1, 1) = 1.0;
        const CMatrix f = precoder_matrix(Precoding::svd_rank1, h);
        CHECK(std::abs(f(0, 0)) == doctest::Approx(1.0));
        CHECK(std::abs(f(1, 0)) == doctest::Approx(0.0));
    }

    TEST_CASE("zero forcing on a singular channel throws")
    {
        CMatrix h = CMatrix::Ones(2, 2);
        const CMatrix y = CMatrix::Zero(2, 4);
        const CMatrix f = precoder_matrix(Precoding::identity, CMatrix::Identity(2, 2));
        CHECK_THROWS_AS(equalize(y, h, Equalizer::zf, 0.1, f), NumericalSingularity);
        CHECK_NOTHROW(equalize(y, h, Equalizer::mmse, 0.1, f));
    }

    TEST_CASE("noiseless zero forcing inverts the channel")
    {
        const auto cs = generate_channel(spec(2, 2, 10, 1, 1.0), 5);
        const CMatrix f = precoder_matrix(Precoding::identity, cs.h[0]);
        Rng rng(3);
        CMatrix s(2, 8);
        for (Eigen::Index i = 0; i < s.size(); ++i) {
            s(i) = rng.complex_gaussian(1.0);
        }
        const CMatrix y = cs.h[0] * (f * s);
        const auto eq = equalize(y, cs.h[0], Equalizer::zf, 1e-3, f);
        CHECK((eq.symbols - s).norm() < 1e-9);
        CHECK(eq.gain(0) == doctest::Approx(1.0));
    }

    TEST_CASE("estimators")
    {
        CHECK(pilot_uses(Estimator::perfect, 2) == 0);
        CHECK(pilot_uses(Estimator::ls, 2) == 2);
        CHECK(pilot_uses(Estimator::lmmse, 4) == 4);
        const auto cs = generate_channel(spec(2, 2, 10, 1, 1.0), 6);
        const CMatrix rx = cs.h[0] * pilot_matrix(2);
        const CMatrix ls = estimate_channel(Estimator::ls, rx, cs.h[0], 0.1);
        CHECK((ls - cs.h[0]).norm() < 1e-12);
        const CMatrix mm = estimate_channel(Estimator::lmmse, rx, cs.h[0], 0.1);
        CHECK((mm - cs.h[0] / 1.2).norm() < 1e-12);
        CHECK(estimate_channel(Estimator::perfect, rx, cs.h[0], 0.1) == cs.h[0]);
    }
}

TEST_SUITE("link")
{
    TEST_CASE("uncoded BPSK on AWGN follows the Q function")
    {
        const ScenarioSpec s = spec(1, 1, 4.0, 1, 1.0);
        const auto cs = identity_channel(s);
        LinkStrategy st;
        st.estimator = Estimator::perfect;
        Rng rng(41);
        const auto rep = run_link(cs, st, 288, 1000, rng);
        const double expected = q_function(std::sqrt(2.0 * std::pow(10.0, 0.4)));
        CHECK(rep.ber == doctest::Approx(expected).epsilon(0.10));
    }

    TEST_CASE("reports are deterministic given the rng state")
    {
        const auto cs = generate_channel(spec(2, 2, 12, 4, 0.9), 1);
        LinkStrategy st{Coding::conv_k7, CodeRate::r2_3, Modulation::qam16, 3,
                        Precoding::svd_full, Estimator::ls, Equalizer::mmse};
        Rng a(5), b(5);
        CHECK(run_link(cs, st, 288, 10, a) == run_link(cs, st, 288, 10, b));
    }

    TEST_CASE("report invariants over random strategies")
    {
        Rng pick(51);
        for (int t = 0; t < 150; ++t) {
            LinkStrategy st;
            const auto& [c, r] = kSchemes[pick.below(5)];
            st.coding = c;
            st.code_rate = r;
            st.modulation = kAllModulations[pick.below(5)];
            st.power_level_db = kAllPowerLevelsDb[pick.below(4)];
            st.precoding = kAllPrecodings[pick.below(3)];
            st.estimator = kAllEstimators[pick.below(3)];
            st.equalizer = kAllEqualizers[pick.below(2)];
            const auto s = spec(2, 2, -4.0 + pick.below(30), 1 + pick.below(4), 0.8);
            const auto cs = generate_channel(s, t);
            Rng rng(t);
            const auto rep = run_link(cs, st, 96, 3, rng);
            CHECK(rep.frames_total == 3);
            CHECK(rep.frames_accepted <= rep.frames_total);
            CHECK(rep.payload_bits == 288);
            CHECK(rep.ber >= 0.0);
            CHECK(rep.ber <= 1.0);
            CHECK(rep.goodput_ratio ==
                  doctest::Approx(static_cast<double>(rep.frames_accepted) / rep.frames_total));
            CHECK(rep.spectral_rate ==
                  doctest::Approx(rep.goodput_ratio * rep.payload_bits / rep.channel_uses));
            CHECK(rep.spectral_rate <=
                  peak_spectral_rate(st, 2, 2) + 1e-12);
            CHECK(rep.p_extra == doctest::Approx(std::log(rep.tx_power_linear)));
            CHECK(rep.pilot_uses ==
                  3 * cs.n_blocks() * pilot_uses(st.estimator, 2));
        }
    }

    TEST_CASE("clean channel delivers every frame")
    {
        const auto cs = generate_channel(spec(2, 2, 40, 4, 0.9), 2);
        LinkStrategy st{Coding::conv_k7, CodeRate::r1_2, Modulation::qpsk, 0,
                        Precoding::svd_rank1, Estimator::lmmse, Equalizer::mmse};
        Rng rng(2);
        const auto rep = run_link(cs, st, 288, 20, rng);
        CHECK(rep.ber == 0.0);
        CHECK(rep.frames_accepted == 20);
    }

    TEST_CASE("mean BER does not increase with SNR")
    {
        LinkStrategy st{Coding::uncoded, CodeRate::r1, Modulation::qpsk, 0, Precoding::identity,
                        Estimator::lmmse, Equalizer::mmse};
        double prev = 1.0;
        for (double snr = 0; snr <= 20; snr += 4) {
            double sum = 0.0;
            for (std::uint64_t seed = 0; seed < 60; ++seed) {
                const auto cs = generate_channel(spec(2, 2, snr, 4, 0.9), 1000 + seed);
                Rng rng(seed);
                sum += run_link(cs, st, 288, 4, rng).ber;
            }
            const double mean = sum / 60.0;
            CHECK(mean <= prev * 1.05 + 1e-4);
            prev = mean;
        }
    }
}
