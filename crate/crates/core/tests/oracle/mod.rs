//! Reference values generated by `generate.py` (mpmath, 30 digits).
#![allow(dead_code, clippy::excessive_precision)]

pub const FERMI_THREE_HALVES_AT_2: f64 = 4.1654144598683217;
pub const FERMI_TWO_AT_2: f64 = 4.7563341964154365;
pub const FERMI_HALF_AT_MINUS_3: f64 = 4.8933705696495779e-2;
pub const FERMI_HALF_AT_12: f64 = 3.1540203287044243e+1;
pub const FERMI_MINUS_HALF_AT_1: f64 = 1.0270571254743507;
pub const BOSE_AT_10: f64 = 4.5401991009687768e-5;
pub const KANE_N: f64 = 8.2541872938551419e+25;
pub const KANE_W: f64 = 7.7880376856991785e+5;
pub const KANE_MU0_TAU_1E13: f64 = -5.0194913361987903e-2;
pub const GRAPHENE_N0: f64 = 1.7738766169575828e+15;
pub const GRAPHENE_G0: f64 = 1.5568745438325353e+47;
pub const GRAPHENE_MU0_TAU_1E13: f64 = -1.4061789824345732;
pub const GRAPHENE_MU2_TAU_1E13: f64 = 1.659321948875238e-1;
pub const SILICON_OPTICAL_COUPLING: f64 = 3.7307559874149507e+69;
pub const SILICON_OPTICAL_C_W: f64 = -9.833889471958786e+17;
pub const SILICON_OPTICAL_KAPPA: f64 = 1.4093045430494393e+42;
pub const SILICON_ELASTIC_KAPPA: f64 = 1.1751128580801125e+42;
pub const GRAPHENE_OPTICAL_C_W_DEGENERATE: f64 = -4.7186603661890499e+6;
pub const GRAPHENE_ACOUSTIC_KAPPA: f64 = -1.6124607880273319e+31;
pub const KANE_PSI_N: f64 = -2.8993484162406814e+22;
pub const KANE_PSI_W: f64 = -3.116283718187717e+2;
pub const KANE_PSI_G11: f64 = -9.3356176253584573e+52;
pub const KANE_PSI_G22: f64 = -8.6551542460640303e+52;
pub const GAPPED_PSI_N: f64 = 1.7094063249537003e+13;
pub const GAPPED_PSI_W: f64 = 2.0276809202231856e-7;
pub const GAPPED_PSI_G11: f64 = 1.3480980063145659e+45;
pub const GAPPED_PSI_G22: f64 = 9.5262780882882074e+44;
