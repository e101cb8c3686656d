//! Karlin-McGregor determinant counts of non-intersecting simple-walk
//! bridges against exact dynamic-programming counts.

use fkmelon::walks::{dp_weyl_count, km_bridge_count};

fn main() {
    let cases: [(&[i64], &[i64], usize); 4] = [
        (&[0, 2], &[0, 2], 2),
        (&[0, 2], &[0, 2], 8),
        (&[0, 2, 4], &[0, 2, 4], 6),
        (&[-2, 0, 2], &[-4, 0, 4], 10),
    ];
    for (x, y, n) in cases {
        let km = km_bridge_count(x, y, n).unwrap();
        let dp = dp_weyl_count(x, y, n).unwrap();
        let total = 2f64.powi((x.len() * n) as i32);
        println!(
            "x={x:?} y={y:?} n={n}: KM {km}, DP {dp}, probability {:.6}",
            km as f64 / total
        );
        assert_eq!(km, dp);
    }
}
