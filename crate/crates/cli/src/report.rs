//! Human-readable component reports at chosen scales.

use std::fmt::Write as _;

use grassfire::distance::format_f64;
use grassfire::persistence::{components_at, ComponentPartition};
use grassfire::DistanceMatrix;

/// Renders the partition at each `epsilon`: the component count, the
/// singletons, then every component's members in ascending order.
pub fn component_report(d: &DistanceMatrix, epsilons: &[f64]) -> String {
    let mut out = String::from("# connected components of the epsilon-neighbourhood graph\n");
    for &eps in epsilons {
        out.push('\n');
        out.push_str(&partition_section(&components_at(d, eps)));
    }
    out
}

fn partition_section(p: &ComponentPartition) -> String {
    let mut s = String::new();
    let members = p.members();
    let singletons = p.singletons();
    let _ = writeln!(s, "epsilon = {}", format_f64(p.epsilon));
    let _ = writeln!(s, "components = {}", members.len());
    let _ = writeln!(
        s,
        "singletons = {}: {}",
        singletons.len(),
        index_set(&singletons)
    );
    for (i, m) in members.iter().enumerate() {
        let noun = if m.len() == 1 { "member" } else { "members" };
        let _ = writeln!(
            s,
            "component {} ({} {noun}): {}",
            i + 1,
            m.len(),
            index_set(m)
        );
    }
    s
}

/// `{0, 1, 5-9}`: runs of three or more consecutive indices are collapsed.
pub fn index_set(sorted: &[usize]) -> String {
    let mut parts = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[j] + 1 {
            j += 1;
        }
        if j - i >= 2 {
            parts.push(format!("{}-{}", sorted[i], sorted[j]));
        } else {
            parts.extend(sorted[i..=j].iter().map(usize::to_string));
        }
        i = j + 1;
    }
    format!("{{{}}}", parts.join(", "))
}
