use alloc::collections::BTreeSet;

use super::tap_offsets;

/// Input offsets that can reach an output position through a stack of
/// `(window, dilation)` layers: the Minkowski sum of their tap sets.
pub fn receptive_field(layers: &[(usize, usize)]) -> BTreeSet<isize> {
    let mut field = BTreeSet::from([0isize]);
    for &(w, d) in layers {
        let taps = tap_offsets(w, d);
        field = field
            .iter()
            .flat_map(|&a| taps.iter().map(move |&b| a + b))
            .collect();
    }
    field
}
