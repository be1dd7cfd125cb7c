//! Operator-level experiments: testing scans, compactness tables, two-bump
//! decay, the trichotomy classifier, Carleson embedding, paraproducts, collar
//! sets and the bucket decomposition.

pub mod buckets;
pub mod bump;
pub mod carleson;
pub mod collar;
pub mod paraproduct;
pub mod scan;
pub mod trichotomy;

pub use buckets::{assign, bucket_decomposition_report, Assignment, Bucket, BucketReport, BUCKET_TOLERANCE};
pub use bump::{bump_report, default_theta, BumpMode, BumpReport, BumpRow};
pub use carleson::{carleson_check, paraproduct_family, CarlesonReport, CARLESON_C0};
pub use collar::{collar_measure, CollarReport, CollarRow};
pub use paraproduct::{center_on, paraproduct_eval, ParaproductReport};
pub use scan::{
    cantor_sweep, classify, compactness_table, rho_mu_of, testing_scan, CompactRow, CompactnessTable, GenerationSweep, ScanConfig,
    ScanResult, Verdict, VerdictPolicy,
};
pub use trichotomy::{trichotomy_classify, Clause, FMuEvaluator, FMuValue, SampledFMu, Trichotomy};
