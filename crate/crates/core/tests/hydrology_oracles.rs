mod common;

use common::*;
use wetmap::hydrology::*;
use wetmap::raster::NODATA;

#[test]
fn fill_matches_fixed_point_iteration() {
    let mut rng = rng(11);
    for case in 0..60 {
        let dem = random_dem(&mut rng, 20, 20, if case % 3 == 0 { 0.05 } else { 0.0 });
        for min_slope in [0.0, 0.01, 0.5] {
            let filled = fill_sinks(&dem, min_slope).unwrap();
            let oracle = brute_fill(&dem, min_slope);
            for i in 0..dem.len() {
                assert_eq!(
                    filled.at(i),
                    oracle[i],
                    "case {case} slope {min_slope} cell {i}"
                );
            }
        }
    }
}

#[test]
fn fill_is_monotone_and_idempotent() {
    let mut rng = rng(12);
    for _ in 0..30 {
        let dem = random_dem(&mut rng, 25, 25, 0.02);
        for min_slope in [0.0, 0.01] {
            let once = fill_sinks(&dem, min_slope).unwrap();
            for i in 0..dem.len() {
                if let Some(z) = dem.at(i) {
                    assert!(once.at(i).unwrap() >= z);
                }
            }
            let twice = fill_sinks(&once, min_slope).unwrap();
            assert_eq!(once.values(), twice.values());
        }
    }
}

#[test]
fn closed_depressions_match_oracle_depth() {
    let mut rng = rng(13);
    for _ in 0..20 {
        let dem = random_dem(&mut rng, 20, 20, 0.0);
        let filled = fill_sinks(&dem, 0.0).unwrap();
        let depth = closed_depressions(&dem, &filled).unwrap();
        let oracle = brute_fill(&dem, 0.0);
        for i in 0..dem.len() {
            assert_eq!(depth.at(i), Some(oracle[i].unwrap() - dem.at(i).unwrap()));
        }
    }
}

#[test]
fn d8_matches_exhaustive_neighbour_check() {
    let mut rng = rng(14);
    for _ in 0..50 {
        let dem = random_dem(&mut rng, 15, 15, 0.03);
        let filled = fill_sinks(&dem, 0.01).unwrap();
        let fd = d8_flow_direction(&filled);
        let oracle = brute_d8(&filled);
        for i in 0..dem.len() {
            assert_eq!(fd.code(i), oracle[i], "cell {i}");
        }
    }
}

#[test]
fn graded_fill_routes_every_interior_cell() {
    let mut rng = rng(15);
    for _ in 0..30 {
        let dem = random_dem(&mut rng, 20, 20, 0.0);
        let filled = fill_sinks(&dem, 0.01).unwrap();
        let fd = d8_flow_direction(&filled);
        let (rows, cols) = (dem.rows(), dem.cols());
        for i in 0..dem.len() {
            let (r, c) = (i / cols, i % cols);
            let interior = r > 0 && c > 0 && r + 1 < rows && c + 1 < cols;
            if interior {
                assert!(fd.code(i).is_some(), "undirected interior cell {i}");
            }
            // Following codes must terminate within rows×cols steps.
            let mut cur = i;
            let mut steps = 0;
            while let Some(next) = fd.target(cur) {
                cur = next;
                steps += 1;
                assert!(steps <= rows * cols, "cycle from {i}");
            }
            assert!(fd.is_outlet(cur));
        }
    }
}

#[test]
fn accumulation_matches_recursive_count_and_conserves_mass() {
    let mut rng = rng(16);
    for case in 0..50 {
        let dem = random_dem(&mut rng, 20, 20, if case % 2 == 0 { 0.04 } else { 0.0 });
        let filled = fill_sinks(&dem, 0.01).unwrap();
        let fd = d8_flow_direction(&filled);
        let acc = flow_accumulation(&fd).unwrap();
        let codes = brute_d8(&filled);
        let valid = filled.valid_mask();
        let oracle = recursive_accumulation(&targets(&codes, 20), &valid);
        let mut outlet_sum = 0.0;
        for i in 0..dem.len() {
            assert_eq!(acc.at(i), oracle[i]);
            if fd.is_outlet(i) {
                outlet_sum += acc.at(i).unwrap();
            }
        }
        assert_eq!(outlet_sum, dem.valid_count() as f64);
    }
}

#[test]
fn ridges_are_cells_nobody_drains_into() {
    let mut rng = rng(17);
    for _ in 0..20 {
        let dem = random_dem(&mut rng, 18, 18, 0.0);
        let fd = d8_flow_direction(&fill_sinks(&dem, 0.01).unwrap());
        let acc = flow_accumulation(&fd).unwrap();
        let ridges = extract_ridges(&acc);
        let tg = targets(&brute_d8(&fill_sinks(&dem, 0.01).unwrap()), 18);
        let mut inflow = vec![0; dem.len()];
        for t in tg.iter().flatten() {
            inflow[*t] += 1;
        }
        for i in 0..dem.len() {
            assert_eq!(ridges.at(i) == Some(1.0), inflow[i] == 0);
        }
    }
}

#[test]
fn distance_matches_brute_force() {
    let mut rng = rng(18);
    for case in 0..80 {
        let density = [0.01, 0.05, 0.2, 0.6][case % 4];
        let mut values: Vec<f64> = (0..400)
            .map(|_| {
                if rand::Rng::random::<f64>(&mut rng) < density {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        if !values.contains(&1.0) {
            values[case % 400] = 1.0;
        }
        let mask = grid(20, 20, 30.0, values);
        let d = distance_to_mask(&mask).unwrap();
        let oracle = brute_nearest(&mask, None);
        for i in 0..400 {
            assert_eq!(d.at(i), Some(oracle[i].1), "case {case} cell {i}");
        }
    }
}

#[test]
fn distance_is_one_lipschitz() {
    let mut rng = rng(19);
    let values: Vec<f64> = (0..900)
        .map(|_| {
            if rand::Rng::random::<f64>(&mut rng) < 0.03 {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let mask = grid(30, 30, 30.0, values);
    let d = distance_to_mask(&mask).unwrap();
    for r in 0..30 {
        for c in 0..30 {
            for &(dr, dc) in &OFFSETS {
                let (nr, nc) = (r as isize + dr, c as isize + dc);
                if nr < 0 || nc < 0 || nr >= 30 || nc >= 30 {
                    continue;
                }
                let sep = 30.0 * ((dr * dr + dc * dc) as f64).sqrt();
                let diff = (d.get(r, c).unwrap() - d.get(nr as usize, nc as usize).unwrap()).abs();
                assert!(diff <= sep + 1e-9);
            }
        }
    }
}

#[test]
fn relative_altitudes_match_brute_force() {
    let mut rng = rng(20);
    for _ in 0..30 {
        let dem = random_dem(&mut rng, 16, 16, 0.0);
        let filled = fill_sinks(&dem, 0.01).unwrap();
        let acc = flow_accumulation(&d8_flow_direction(&filled)).unwrap();
        let channels = extract_channels(&acc, 8.0).unwrap();
        if !channels.values().contains(&1.0) {
            continue;
        }
        let ridges = extract_ridges(&acc);
        let aacl = altitude_above_channel(&filled, &channels).unwrap();
        let abrl = altitude_below_ridge(&filled, &ridges).unwrap();
        let key: Vec<f64> = filled.values().to_vec();
        let near_ch = brute_nearest(&channels, Some(&key));
        let near_ri = brute_nearest(&ridges, Some(&key));
        for i in 0..dem.len() {
            let z = key[i];
            assert_eq!(aacl.at(i), Some((z - key[near_ch[i].0]).max(0.0)));
            assert_eq!(abrl.at(i), Some((key[near_ri[i].0] - z).max(0.0)));
        }
        let rps = relative_slope_position(&aacl, &abrl).unwrap();
        for i in 0..dem.len() {
            let v = rps.at(i).unwrap();
            assert!((0.0..=1.0).contains(&v));
            if channels.at(i) == Some(1.0) {
                assert_eq!(v, 0.0);
            }
            if ridges.at(i) == Some(1.0) && aacl.at(i).unwrap() > 0.0 {
                assert_eq!(v, 1.0);
            }
        }
    }
}

#[test]
fn nodata_stays_nodata_through_the_chain() {
    let mut rng = rng(21);
    let dem = random_dem(&mut rng, 20, 20, 0.1);
    let filled = fill_sinks(&dem, 0.01).unwrap();
    let acc = flow_accumulation(&d8_flow_direction(&filled)).unwrap();
    for i in 0..dem.len() {
        if dem.at(i).is_none() {
            assert_eq!(filled.values()[i], NODATA);
            assert_eq!(acc.at(i), None);
        }
    }
}
