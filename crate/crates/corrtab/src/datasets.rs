//! Bundled study datasets, embedded verbatim.

/// Lidocaine prophylaxis outcomes: five trials, treatment vs control.
pub const LIDOCAINE_CSV: &str = include_str!("../datasets/lidocaine.csv");

/// Sparse multicenter clinical trial outcomes: twenty-one trials.
pub const MULTICENTER_CSV: &str = include_str!("../datasets/multicenter.csv");

/// (name, contents) pairs for every bundled dataset.
pub fn builtin() -> [(&'static str, &'static str); 2] {
    [
        ("lidocaine", LIDOCAINE_CSV),
        ("multicenter", MULTICENTER_CSV),
    ]
}

/// Contents of the named bundled dataset, byte-exact.
pub fn get(name: &str) -> Option<&'static str> {
    builtin()
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, csv)| *csv)
}
