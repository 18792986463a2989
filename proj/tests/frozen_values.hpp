#pragma once

// Values produced by tests/oracles/oracle.py (numpy/scipy, no shared code with
// the library). Regenerate with `python3 tests/oracles/oracle.py`.

#include <array>

namespace frozen {

inline constexpr int z3_r8_vertices = 4913;
inline constexpr int z3_r8_edges = 13872;
inline constexpr std::array<int, 3> z3_r8_sup_levels{125, 729, 2197};
inline constexpr int tree_2_10 = 2047;

inline constexpr std::array<double, 4> p2_mu14_sym{1.0, -0.5, -0.5, 0.25};
inline constexpr std::array<double, 2> p2_mu14_eigs{0.0, 1.25};

inline constexpr double z3_r6_well_lowest = -2.1948021213600644;
inline constexpr int z3_r6_well_morse = 4;

// half-line length 60, V = -c on {0..4}, c = 0.5, 2, 8
inline constexpr std::array<int, 3> halfline60_morse_c{2, 3, 5};
// lambda_1 of the exterior of the ball of radius r = 0..9, well depth 8
inline constexpr std::array<double, 10> halfline60_ext_lambda1{
    -7.633442270670126,    -7.442300322788226,    -7.057453770738386,    -6.124999999999995,
    0.0007728850108917659, 0.0008009857633569999, 0.0008306473522978007, 0.0008619875460029488,
    0.0008951354329931928, 0.0009302327532968479};
inline constexpr int halfline60_min_stable_radius = 4;

// largest exterior lambda_1 over radii 10..90, V = -0.5 on Z^1 radius 100
inline constexpr double z1_const_neg_max_ext_lambda1 = -0.47766165245025716;

// L = [[2,-1],[-1,2]], V = (-2, 0)
inline constexpr double p2_bs_T_max = 1.3333333333333328;

// Dirichlet Z^3 radius 12, V = -5 on the unit ball, graph balls r = 2..12
inline constexpr std::array<int, 11> z3_tail_counts{1, 4, 4, 4, 4, 4, 4, 4, 4, 4, 4};
inline constexpr int z3_tail_rstar = 3;

inline constexpr int halfline_pipeline_morse = 5;
inline constexpr int halfline_pipeline_morse_doubled = 5;

inline constexpr int z3_pipeline_r10_omega = 1159;
inline constexpr int z3_pipeline_r10_morse = 4;
inline constexpr std::array<double, 8> z3_pipeline_r10_lowest{
    -2.1948014215893705, -0.14310259057233665, -0.1431025905723322, -0.14310259057233043,
    0.3292618007036374,  0.3292618007036392,   0.33083167702787186, 0.5418429624426659};
inline constexpr int z3_pipeline_r20_omega = 8473;
inline constexpr int z3_pipeline_r20_morse = 4;
inline constexpr std::array<double, 8> z3_pipeline_r20_lowest{
    -2.1948019609026628, -0.14479073073545923, -0.144790730735453,  -0.14479073073543347,
    0.07867630739238862, 0.1379545757469378,   0.13795457574695114, 0.13795457574699466};

// Dirichlet Z^3 radius 10, V = -lambda on the unit ball, lambda = 4..64
inline constexpr std::array<int, 5> clr_counts{1, 7, 7, 7, 7};
inline constexpr double clr_exponent = 0.5614709844115211;

}  // namespace frozen
