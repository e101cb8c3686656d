//! Planar duality of the edge parameter: the dual map, its involution, and
//! the self-dual point.

use fkmelon::gibbs::{dual_parameter, self_dual_point};

fn main() {
    let q = 2.0;
    for p in [0.1, 0.25, 0.5, 0.7, 0.9] {
        let d = dual_parameter(p, q);
        println!("q = {q}: dual({p:.2}) = {d:.6}, dual(dual) = {:.6}", dual_parameter(d, q));
    }
    for q in [1.0, 2.0, 4.0] {
        let sd = self_dual_point(q);
        println!(
            "q = {q}: self-dual point {sd:.6}, dual there {:.6}",
            dual_parameter(sd, q)
        );
    }
}
