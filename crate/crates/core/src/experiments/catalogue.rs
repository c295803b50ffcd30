//! The experiment catalogue: one entry per tag, with the harness operations it
//! drives, the statement it probes and its declared metrics.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::harness::report::{fmt_num, Check};

/// Every public harness operation; each must be driven by exactly one tag.
pub const HARNESS_OPERATIONS: [&str; 8] = [
    "grid_project",
    "eigen_convergence",
    "fdd_compare",
    "tightness_probe",
    "tv_window",
    "stay_positive_scaling",
    "meeting_probability",
    "eta_good_census",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricDecl {
    pub name: &'static str,
    pub check: Check,
    pub meaning: &'static str,
}

const fn decl(name: &'static str, check: Check, meaning: &'static str) -> MetricDecl {
    MetricDecl { name, check, meaning }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatalogueEntry {
    pub tag: &'static str,
    pub title: &'static str,
    pub operations: &'static [&'static str],
    /// The statement under test.
    pub statement: &'static str,
    pub metrics: &'static [MetricDecl],
    /// Tables written as `<name>.csv`.
    pub tables: &'static [&'static str],
}

impl CatalogueEntry {
    pub fn metric(&self, name: &str) -> Option<&MetricDecl> {
        self.metrics.iter().find(|m| m.name == name)
    }

    pub fn metric_names(&self) -> Vec<&'static str> {
        self.metrics.iter().map(|m| m.name).collect()
    }

    /// Human-readable description with the tolerance table.
    pub fn describe(&self) -> String {
        let mut out = format!("{} — {}\n\n", self.tag, self.title);
        let _ = writeln!(out, "Statement: {}\n", self.statement);
        let _ = writeln!(out, "Harness operations: {}", self.operations.join(", "));
        let _ = writeln!(out, "Tables: {}\n", self.tables.iter().map(|t| format!("{t}.csv")).collect::<Vec<_>>().join(", "));
        let _ = writeln!(out, "Pass criteria:");
        let width = self.metrics.iter().map(|m| m.name.len()).max().unwrap_or(0);
        for m in self.metrics {
            let rule = match m.check {
                Check::Below(t) => format!("< {}", fmt_num(t)),
                Check::AtLeast(t) => format!(">= {}", fmt_num(t)),
                Check::Holds => "holds".into(),
                Check::Info => "reported".into(),
            };
            let _ = writeln!(out, "  {:width$}  {:9}  {}", m.name, rule, m.meaning);
        }
        out
    }
}

pub const CATALOGUE: &[CatalogueEntry] = &[
    CatalogueEntry {
        tag: "eigen-convergence",
        title: "lattice ground state versus the Sturm–Liouville ground state",
        operations: &["eigen_convergence", "grid_project"],
        statement: "as λ → 0, the rescaled Perron eigenvalue e_λ = −H² log E_λ converges to the continuum \
                    ground-state energy e_0 of (σ²/2)d²/dr² − q(r) on (0, ∞) with a Dirichlet wall at 0, \
                    the eigenfunction φ_λ converges to the cell averages ρ_λφ_0 in ‖·‖_{2,λ}, and c_λ/h_λ → 1",
        metrics: &[
            decl("e0", Check::Info, "continuum ground-state energy"),
            decl("e_rel_error", Check::Below(0.05), "|e_λ − e_0| / e_0 at the smallest λ"),
            decl("e_error_decreasing", Check::Holds, "|e_λ − e_0| strictly decreases as λ decreases"),
            decl("phi_error", Check::Below(0.05), "‖φ_λ − ρ_λφ_0‖_{2,λ} at the smallest λ"),
            decl("phi_error_decreasing", Check::Holds, "the eigenfunction error strictly decreases"),
            decl("c_over_h_deviation", Check::Below(0.05), "|c_λ/h_λ − 1| at the smallest λ"),
        ],
        tables: &["e_lambda", "phi_lambda"],
    },
    CatalogueEntry {
        tag: "fdd",
        title: "finite-dimensional distributions of the rescaled walk",
        operations: &["fdd_compare"],
        statement: "the finite-dimensional distributions of x_λ(t) = h X_{H²t} under the stationary ground-state \
                    chain (or a long tilted bridge) converge to those of the stationary Ferrari–Spohn diffusion, \
                    whose one-time law is φ_0²(r)dr",
        metrics: &[
            decl("marginal_ks_finest", Check::Below(0.02), "largest one-time KS distance to φ_0² at the smallest λ"),
            decl("pair_tv_finest", Check::Below(0.08), "largest binned pair TV to the diffusion at the smallest λ"),
            decl("fs_marginal_ks", Check::Below(0.02), "largest one-time KS distance of the diffusion sample to φ_0²"),
            decl("marginal_ks_improves", Check::Holds, "marginal KS at the smallest λ is below that at the largest"),
            decl("pair_tv_improves", Check::Holds, "pair TV at the smallest λ is below that at the largest"),
            decl("fs_escapes", Check::Info, "Euler–Maruyama reflections at 0 or R"),
        ],
        tables: &["fdd_marginals", "fdd_pairs"],
    },
    CatalogueEntry {
        tag: "tightness",
        title: "modulus of continuity of the rescaled chain",
        operations: &["tightness_probe"],
        statement: "the family x_λ is tight: P(max_{0≤t≤δ}|x_λ(t) − x_λ(0)| > ε)/δ stays bounded as δ → 0, \
                    uniformly in λ",
        metrics: &[
            decl("ratio_spread", Check::Below(3.0), "max/min over λ of estimate/δ at the reference (ε, δ)"),
            decl("monotone_in_delta", Check::Holds, "estimates never increase as δ shrinks"),
            decl("max_ratio", Check::Info, "largest estimate/δ over the grid"),
            decl("large_epsilon_estimate", Check::Info, "estimate at the largest ε and largest δ"),
        ],
        tables: &["tightness"],
    },
    CatalogueEntry {
        tag: "tv-window",
        title: "bridge window law versus the stationary chain",
        operations: &["tv_window"],
        statement: "for endpoints u, v ≤ C H, the law of a tilted bridge of half-length N restricted to the \
                    window [−T H², T H²] is within total variation A e^{−cN/H²} of the stationary chain",
        metrics: &[
            decl("tv_decreasing", Check::Holds, "exact window TV at the largest N is below that at the smallest N, for every (u, v)"),
            decl("endpoint_uniformity", Check::Below(0.05), "TV between the first two (u, v) window laws at the largest N"),
            decl("coarse_contracts", Check::Holds, "coarse-binned TV ≤ fine-binned TV + 0.01 on every row"),
            decl("tv_largest_n", Check::Info, "largest exact TV at the largest N"),
            decl("decay_rate", Check::Info, "fitted c in TV ≈ A e^{−cN/H²}"),
        ],
        tables: &["tv_window"],
    },
    CatalogueEntry {
        tag: "stay-positive",
        title: "confined walk probabilities",
        operations: &["stay_positive_scaling"],
        statement: "for 1 ≤ x, y ≤ η√n and n/3 ≤ m ≤ n, the probability that a walk from x reaches y at time m \
                    while staying in (0, 2η√n) is of order xy/n^{3/2}",
        metrics: &[
            decl("ratio_spread", Check::Below(2.0), "max/min across n of P·n^{3/2}/(xy), worst m-fraction"),
            decl("band_spread", Check::Info, "max/min of the ratio over all (n, m)"),
            decl("cap_effect_max", Check::Info, "largest uncapped/capped probability ratio"),
        ],
        tables: &["stay_positive"],
    },
    CatalogueEntry {
        tag: "meeting",
        title: "meeting of two confined bridges",
        operations: &["meeting_probability"],
        statement: "two independent confined bridges with endpoints in [1, η√n] meet with probability bounded \
                    below uniformly in n; the intersection count 𝒩 on [n/3, 2n/3] satisfies E𝒩 ≳ √n and \
                    E𝒩² ≲ n, and the Paley–Zygmund inequality turns these into the floor (1−α)²(E𝒩)²/E𝒩²",
        metrics: &[
            decl("mean_count_spread", Check::Below(2.0), "max/min across n of E𝒩/√n"),
            decl("second_moment_spread", Check::Below(2.0), "max/min across n of E𝒩²/n"),
            decl("pz_floor_holds", Check::Holds, "meeting frequency ≥ Paley–Zygmund floor for every n"),
            decl("mean_count_consistent", Check::Holds, "sampled E𝒩 within 3 standard errors of the exact value"),
            decl("mean_count_min", Check::Info, "smallest E𝒩/√n"),
            decl("meeting_min", Check::Info, "smallest meeting frequency"),
        ],
        tables: &["meeting"],
    },
    CatalogueEntry {
        tag: "eta-good",
        title: "census of η-good intervals",
        operations: &["eta_good_census"],
        statement: "for two tilted bridges on a window of length of order H², a positive fraction of the \
                    middle intervals I_{3k+2} are η-good (both paths below 2ηH inside, below ηH at both ends)",
        metrics: &[
            decl("middle_fraction_min", Check::AtLeast(0.5), "smallest fraction of good middle intervals over replicas"),
            decl("middle_fraction_mean", Check::Info, "mean fraction of good middle intervals"),
            decl("good_fraction_mean", Check::Info, "mean fraction of good intervals"),
        ],
        tables: &["eta_good"],
    },
    CatalogueEntry {
        tag: "bridge-sample",
        title: "exact tilted-bridge sampling",
        operations: &[],
        statement: "samples of the tilted bridge from u to v over 2N steps have the exact dynamic-programming \
                    marginals; reports log Z and writes the sampled paths",
        metrics: &[
            decl("log_z", Check::Info, "log partition function"),
            decl("marginal_tv_mid", Check::Below(0.05), "TV between empirical and exact marginal at time 0"),
        ],
        tables: &["bridge_marginal"],
    },
];

pub fn tags() -> Vec<&'static str> {
    CATALOGUE.iter().map(|e| e.tag).collect()
}

pub fn entry(tag: &str) -> Result<&'static CatalogueEntry> {
    CATALOGUE.iter().find(|e| e.tag == tag).ok_or_else(|| Error::UnknownExperiment {
        tag: tag.into(),
        valid: tags().join(", "),
    })
}

pub fn describe(tag: &str) -> Result<String> {
    entry(tag).map(CatalogueEntry::describe)
}

/// One line per experiment.
pub fn listing() -> String {
    let width = CATALOGUE.iter().map(|e| e.tag.len()).max().unwrap_or(0);
    CATALOGUE
        .iter()
        .map(|e| format!("{:width$}  {}\n", e.tag, e.title))
        .collect()
}
