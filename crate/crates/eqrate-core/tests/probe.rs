mod common;

use eqrate_core::{epsilon_min, Concept, NormalFormGame};

#[test]
fn dissect_iteration_limit() {
    let payoffs: Vec<f64> = vec![
        0.15526910272705916,
        -0.986555907194969,
        -0.38732849067742764,
        0.6664549089532978,
        0.46006375816760864,
        0.09214990007002587,
        -0.6106692463827117,
        0.0,
        0.37473937430580756,
        0.13884134333166634,
        0.6563630402864554,
        -0.356844021752484,
        -0.37326131985091937,
        0.1668166337673928,
        0.5244472421050086,
        -0.041254539160914004,
        -0.3801516669926589,
        0.0,
    ];
    let c = 3.8749602187245373;
    let d = -0.4321471271567749;
    let game = NormalFormGame::from_payoffs(&[3,3], payoffs.clone()).unwrap();
    let shifted =
        NormalFormGame::from_payoffs(&[3,3], payoffs.iter().map(|v| c * v + d).collect())
            .unwrap();
    for concept in [Concept::Ce, Concept::Cce] {
        for (tag, g) in [("base", &game), ("scaled", &shifted)] {
            match epsilon_min(g, concept) {
                Ok(min) => println!("{concept:?} {tag}: eps_min {:?}", min.epsilon[0]),
                Err(e) => println!("{concept:?} {tag}: LP ERROR {e}"),
            }
        }
    }
}
