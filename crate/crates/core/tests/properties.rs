use std::path::Path;

use assortify::demand::{fit_als, impute, normalized_shares, AlsConfig, Observation, Provenance, SalesMatrix};
use assortify::domain::{validate_catalog, FabricBlend, FabricTable, Product, Store};
use assortify::ingest::{load_bundle_dir, parse_products_str, write_bundle, DatasetBundle, Manifest};
use assortify::optimizer::{
    even_grid, fabric_composition, histogram, optimize_assortment, pareto_front, Locks, OptimizeRequest,
    StoreInstance,
};
use assortify::sustainability::{assortment_higg_score, score_catalog, ProductHiggScore};
use assortify::Catalog;
use proptest::prelude::*;

const FABRICS: [(&str, f64); 4] = [("cotton", 98.0), ("viscose", 62.0), ("polyester", 44.0), ("linen", 20.0)];

fn table() -> FabricTable {
    let mut t = FabricTable::new();
    for (name, value) in FABRICS {
        t.insert(name, value).unwrap();
    }
    t
}

fn blend() -> impl Strategy<Value = FabricBlend> {
    prop::sample::subsequence(vec![0usize, 1, 2, 3], 1..=3).prop_flat_map(|fabrics| {
        let n = fabrics.len();
        prop::collection::vec(1u32..100, n).prop_map(move |raw| {
            let total: u32 = raw.iter().sum();
            FabricBlend::new(fabrics.iter().zip(&raw).map(|(&f, &r)| (FABRICS[f].0, r as f64 / total as f64)))
        })
    })
}

fn product_strategy() -> impl Strategy<Value = (f64, f64, FabricBlend)> {
    (0.0f64..200.0, 0.05f64..2.0, blend())
}

/// A valid catalog with shuffled ids and a sparse sales matrix.
fn bundle_strategy() -> impl Strategy<Value = DatasetBundle> {
    (prop::collection::vec(product_strategy(), 1..25), 1usize..4).prop_flat_map(|(products, n_stores)| {
        let n = products.len();
        let cells = prop::collection::vec(prop::option::weighted(0.7, 0.0f64..40.0), n * n_stores);
        (Just(products), Just(n_stores), cells).prop_map(|(products, n_stores, cells)| {
            let n = products.len();
            let products: Vec<Product> = products
                .into_iter()
                .enumerate()
                .map(|(j, (price, weight_kg, blend))| Product {
                    id: format!("sku-{:03}", (j * 37) % 101),
                    name: format!("Item {j}"),
                    category: if j % 2 == 0 { "tops".into() } else { "bottoms".into() },
                    price,
                    weight_kg,
                    blend,
                })
                .collect();
            let stores = (0..n_stores)
                .map(|s| Store { id: format!("store-{s}"), name: format!("Store {s}"), region: None })
                .collect();
            let mut observations: Vec<Observation> = cells
                .iter()
                .enumerate()
                .filter_map(|(c, v)| v.map(|v| Observation::new(c / n_stores, c % n_stores, v)))
                .collect();
            if observations.is_empty() {
                observations.push(Observation::new(0, 0, 1.0));
            }
            DatasetBundle {
                catalog: Catalog::new(products, stores, table()),
                sales: SalesMatrix::new(n, n_stores, observations).unwrap(),
                source_manifest: Manifest::default(),
            }
        })
    })
}

fn pipeline(bundle: &DatasetBundle) -> (assortify::demand::DemandMatrix, Vec<ProductHiggScore>) {
    let config = AlsConfig { rank: 2, n_iterations: 8, ..AlsConfig::default() };
    let model = fit_als(&bundle.sales, &config).unwrap();
    let demand = impute(&model, &bundle.sales).unwrap();
    (demand, score_catalog(&bundle.catalog).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn valid_catalogs_flow_through_the_pipeline(
        bundle in bundle_strategy(),
        lambda_step in 0usize..=20,
        k_raw in 1usize..8,
        normalize in any::<bool>(),
    ) {
        let catalog = &bundle.catalog;
        prop_assert!(validate_catalog(catalog).is_empty());
        prop_assert_eq!(validate_catalog(catalog), validate_catalog(catalog));
        let (demand, higg) = pipeline(&bundle);

        for o in bundle.sales.observations() {
            prop_assert_eq!(demand.get(o.product, o.store), o.value);
            prop_assert_eq!(demand.provenance(o.product, o.store), Provenance::Observed);
        }
        prop_assert!(demand.values().iter().all(|v| *v >= 0.0));

        let k = k_raw.min(catalog.n_products());
        let lambda = lambda_step as f64 / 20.0;
        for store in 0..catalog.n_stores() {
            let request = OptimizeRequest { store_index: store, k, trade_off_lambda: lambda, locks: Locks::default(), normalize };
            let solution = optimize_assortment(&request, &demand, catalog, &higg).unwrap();
            prop_assert_eq!(solution.product_ids.len(), k);

            let picked: Vec<ProductHiggScore> = solution
                .product_ids
                .iter()
                .map(|id| higg[catalog.product_index(id).unwrap()].clone())
                .collect();
            let recomputed = assortment_higg_score(&picked).unwrap();
            prop_assert!((solution.higg_score - recomputed).abs() <= 1e-9);

            let shares = fabric_composition(&solution, catalog).unwrap();
            prop_assert!((shares.values().sum::<f64>() - 1.0).abs() <= 1e-9);

            if demand.store_column(store).iter().sum::<f64>() > 0.0 {
                let shares = normalized_shares(&demand, store).unwrap();
                prop_assert!((shares.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            }
        }

        let scores: Vec<f64> = higg.iter().map(|h| h.score).collect();
        let bins = histogram(&scores, 20).unwrap();
        prop_assert_eq!(bins.iter().map(|b| b.count).sum::<usize>(), scores.len());
    }

    #[test]
    fn endpoints_ignore_normalization(bundle in bundle_strategy(), k_raw in 1usize..6) {
        let (demand, higg) = pipeline(&bundle);
        let catalog = &bundle.catalog;
        let k = k_raw.min(catalog.n_products());
        let instance = StoreInstance::from_catalog(0, &demand, catalog, &higg).unwrap();
        let scales = instance.scales();
        for (lambda, degenerate) in [
            (0.0, scales.revenue_max <= scales.revenue_min),
            (1.0, scales.higg_max <= scales.higg_min),
        ] {
            if degenerate {
                continue;
            }
            let solve = |normalize| {
                let request = OptimizeRequest { store_index: 0, k, trade_off_lambda: lambda, locks: Locks::default(), normalize };
                optimize_assortment(&request, &demand, catalog, &higg).unwrap().product_ids
            };
            prop_assert_eq!(solve(true), solve(false));
        }
    }

    #[test]
    fn locks_hold_at_every_lambda(bundle in bundle_strategy(), picks in prop::collection::vec(any::<prop::sample::Index>(), 2)) {
        let (demand, higg) = pipeline(&bundle);
        let catalog = &bundle.catalog;
        let n = catalog.n_products();
        prop_assume!(n >= 3);
        let a = picks[0].index(n);
        let b = picks[1].index(n);
        prop_assume!(a != b);
        let locks = Locks {
            locked_in: [catalog.products()[a].id.clone()].into(),
            locked_out: [catalog.products()[b].id.clone()].into(),
        };
        let instance = StoreInstance::from_catalog(0, &demand, catalog, &higg).unwrap();
        let front = pareto_front(&instance, 2, &even_grid(11), &locks, true).unwrap();
        for member in &front.solutions {
            prop_assert!(member.solution.product_ids.contains(&catalog.products()[a].id));
            prop_assert!(!member.solution.product_ids.contains(&catalog.products()[b].id));
        }
        for w in front.solutions.windows(2) {
            prop_assert!(w[1].solution.revenue_score <= w[0].solution.revenue_score);
            prop_assert!(w[1].solution.higg_score <= w[0].solution.higg_score);
        }
    }

    #[test]
    fn bundles_round_trip_through_files(bundle in bundle_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        write_bundle(&bundle, dir.path()).unwrap();
        let loaded = load_bundle_dir(dir.path()).unwrap();
        prop_assert_eq!(&loaded.catalog, &bundle.catalog);
        prop_assert_eq!(&loaded.sales, &bundle.sales);
        prop_assert_eq!(loaded.source_manifest.files.len(), 4);
    }
}

#[test]
fn decimal_commas_are_rejected() {
    let text = "id,name,category,price,weight_kg,blend\np1,Tee,tops,\"19,99\",1,cotton:1\n";
    let err = parse_products_str(Path::new("products.csv"), text, &table()).unwrap_err();
    assert_eq!(err.kind(), "ParseError");
    assert!(err.to_string().contains("price"), "{err}");
}

#[test]
fn indices_follow_file_order() {
    let text = "id,name,category,price,weight_kg,blend\nzeta,Z,tops,1,1,cotton:1\nalpha,A,tops,1,1,linen:1\n";
    let products = parse_products_str(Path::new("products.csv"), text, &table()).unwrap();
    let catalog = Catalog::new(products, vec![], table());
    assert_eq!(catalog.product_index("zeta"), Some(0));
    assert_eq!(catalog.product_index("alpha"), Some(1));
}
