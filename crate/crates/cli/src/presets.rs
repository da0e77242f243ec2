use crate::document::ExperimentDocument;

const CATALOG: &[(&str, &str)] = &[
    ("asnet10_alpha_sweep", include_str!("../presets/asnet10_alpha_sweep.json")),
    ("asnet10_scheme_compare", include_str!("../presets/asnet10_scheme_compare.json")),
    ("bottleneck_equal_memory", include_str!("../presets/bottleneck_equal_memory.json")),
    ("bottleneck_alloc", include_str!("../presets/bottleneck_alloc.json")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    CATALOG.iter().map(|(n, _)| *n)
}

pub fn source(name: &str) -> Option<&'static str> {
    CATALOG.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn get(name: &str) -> Option<ExperimentDocument> {
    source(name).map(|s| ExperimentDocument::from_json(s).expect("shipped presets parse"))
}
