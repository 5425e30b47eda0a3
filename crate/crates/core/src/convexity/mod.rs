//! Markov 2-convexity and diamond 2-convexity functionals, the `S_q`
//! inequality suite and impossibility certificates for dimension reduction in
//! `S_1`.

mod certificate;
mod inequalities;
mod markov;

pub use certificate::{
    exp_log_bound, impossibility_certificate, CertificateOptions, ImpossibilityCertificate,
};
pub use inequalities::{
    ball_convexity_check, clarkson_check, enflo_type_check, hypercube_lower_bound,
    martingale_cotype_check, roundness_check, HypercubeBound, MartingaleCheck,
};
pub use markov::{
    default_scale_cap, diamond_convexity_ratio, laakso_canonical_chain, markov_convexity_ratio,
    reports_to_csv, ChainSpec, ConvexityReport, DiamondRatio, PointMap,
};
