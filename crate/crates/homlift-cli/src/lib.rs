//! Plumbing around the homlift engine: JSON manifests describing a lifting
//! or comparison problem, bundled fixtures, a hash-keyed basis cache, and
//! deterministic report emission.

pub mod cache;
pub mod commands;
pub mod manifest;
pub mod providers;
pub mod report;
pub mod selftest;

/// Bundled problem descriptions, compiled into the binary so `--fixture`
/// works from any directory.
pub const FIXTURES: &[(&str, &str)] = &[
    ("com-strict", include_str!("../fixtures/com-strict.json")),
    ("ass-strict", include_str!("../fixtures/ass-strict.json")),
    ("massey-gf2", include_str!("../fixtures/massey-gf2.json")),
    (
        "coboundary-difference",
        include_str!("../fixtures/coboundary-difference.json"),
    ),
    (
        "nontrivial-class",
        include_str!("../fixtures/nontrivial-class.json"),
    ),
    (
        "shallow-provider",
        include_str!("../fixtures/shallow-provider.json"),
    ),
    (
        "validate-wedge-q",
        include_str!("../fixtures/validate-wedge-q.json"),
    ),
    (
        "validate-ass-gf2",
        include_str!("../fixtures/validate-ass-gf2.json"),
    ),
    (
        "validate-torsion-gf2",
        include_str!("../fixtures/validate-torsion-gf2.json"),
    ),
    (
        "validate-torsion-q",
        include_str!("../fixtures/validate-torsion-q.json"),
    ),
];

pub fn fixture(name: &str) -> Option<&'static str> {
    FIXTURES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, body)| *body)
}
