//! Draws one cellular cluster: station layout, user drops, cooperation sets and
//! the whitened channels handed to the solvers.

use netmimo::linalg::frobenius;
use netmimo::scenario::{realize_seeded, ScenarioConfig};

fn main() -> netmimo::Result<()> {
    let cfg = ScenarioConfig { cluster_size: 3, cooperation: 2, users_per_cell: 2, seed: 5, ..ScenarioConfig::default() };
    let net = realize_seeded(&cfg)?;
    let g = &net.geometry;
    println!("{} stations in the cluster, {} interfering cells", g.num_cluster, g.bs_positions.len() - g.num_cluster);
    for (m, p) in g.bs_positions[..g.num_cluster].iter().enumerate() {
        println!("  BS {m} at ({:.3}, {:.3}) km", p[0], p[1]);
    }
    for k in 0..net.system.num_users() {
        let p = g.user_positions[k];
        let norms: Vec<String> = net.whitened.channels[k].iter().map(|h| format!("{:.2}", frobenius(h))).collect();
        println!(
            "user {k} in cell {} at ({:.3}, {:.3}) km: served by {:?}, whitened channel norms [{}], noise-plus-interference power {:.3e}",
            g.user_cell[k],
            p[0],
            p[1],
            net.system.serving_sets[k],
            norms.join(", "),
            net.whitened.whitening[k][(0, 0)].re.powi(-2)
        );
    }
    Ok(())
}
