// How many distinct scenes the tree keeps, against the exact best.
//
// Each photo in a chain looks like its neighbours only. The best
// selection keeps every other photo; the tree, committed to its early
// anchors, can keep fewer.

use crowdreport::atree::ATree;
use crowdreport::model::ConstraintKind;
use crowdreport::oracle::score_tree;
use crowdreport::simulator::chain_stream;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let (chain, layer) = chain_stream(7, ConstraintKind::Visual, "chain");
    let orders: [(&str, Vec<usize>); 3] = [
        ("in order", (0..7).collect()),
        ("odd first", vec![1, 3, 5, 0, 2, 4, 6]),
        ("from the middle", vec![3, 2, 4, 1, 5, 0, 6]),
    ];
    for (label, order) in orders {
        let mut tree = ATree::new("chain", vec![layer]);
        for &i in &order {
            tree.insert(chain[i].clone())?;
        }
        let summary = score_tree(&tree)?;
        println!(
            "{label:>15}: {} groups, optimum {} {:?}, coverage {:.3}",
            summary.tree_groups,
            summary.oracle_size,
            summary.witness,
            summary.coverage_ratio.unwrap_or(0.0)
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
