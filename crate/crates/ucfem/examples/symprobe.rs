//! Temporary probe.

use std::sync::Arc;
use ucfem::mesh::{tag_triangles, unit_disc_mesh, unit_square_mesh, RegionSpec, REGION_OMEGA};

fn main() {
    for h in [0.7, 0.5, 0.4, 0.35] {
        let mesh = Arc::new(tag_triangles(unit_disc_mesh(h).unwrap(), RegionSpec::omega_disc()));
        let nt = mesh.triangles.len();
        let tagged = mesh.tri_region_tags.get(&REGION_OMEGA).map_or(0, |s| s.len());
        println!("disc({h}): nt={nt} tagged={tagged} |omega_h|={:.6}", mesh.region_area(REGION_OMEGA));
    }
    let sq = Arc::new(tag_triangles(unit_square_mesh(2).unwrap(), RegionSpec::omega_disc()));
    let tagged = sq.tri_region_tags.get(&REGION_OMEGA).map_or(0, |s| s.len());
    println!("square(2): nt={} tagged={tagged} |omega_h|={:.6}", sq.triangles.len(), sq.region_area(REGION_OMEGA));
}
