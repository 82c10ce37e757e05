use kpartite::bd::BdBranch;
use kpartite::model::PowerLawRate;
use rand::Rng; use rand::SeedableRng; use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for levels in 1..=8usize {
        let mut branches = vec![BdBranch::standard(levels, PowerLawRate::pow(1,1))];
        for _ in 0..3 {
            let birth: Vec<f64> = (1..levels).map(|_| rng.gen_range(0.2..5.0)).collect();
            let death: Vec<f64> = (1..=levels).map(|_| rng.gen_range(0.2..5.0)).collect();
            branches.push(BdBranch::new(birth, death, PowerLawRate::pow(1,1)).unwrap());
        }
        for (bi, branch) in branches.iter().enumerate() {
            for &nu in &[0.5, 2.0, 10.0, 150.0] {
                let chain = branch.absorbing_chain(nu);
                for l1 in 1..=levels {
                    match chain.mean_hitting_time(l1, &[0]) {
                        Ok(_) => {},
                        Err(e) => { println!("L={levels} b={bi} nu={nu} l1={l1}: {e:?}"); return; }
                    }
                }
            }
        }
    }
    println!("all ok");
}
