use primcov::config::PlanConfig;
use primcov::pipeline::{build_graph_with_sensor, prepare_scene, viewpoint_visibility};
use primcov::search::{baseline_greedy_viewpoints, baseline_vpp_tsp, gns};

fn main() {
    for (n_vp, d_pair) in [(1500usize, 8.0f64), (1000, 10.0), (2000, 6.0), (1000, 12.0)] {
        let mut config = PlanConfig::default();
        config.mesh = Some("/tmp/smoke/box.obj".into());
        config.sampling.via_point_count = n_vp;
        config.sampling.pair_distance = Some(d_pair);
        let resolved = config.resolve().unwrap();
        let scene = prepare_scene(&resolved).unwrap();
        let (mut gl, mut bl, mut vl) = (0.0, 0.0, 0.0);
        let trials = 2;
        let mut edges = 0;
        let mut failed = false;
        for seed in 0..trials {
            let mut sampling = resolved.sampling.clone();
            sampling.seed = seed;
            let p = build_graph_with_sensor(&scene, &sampling, &resolved.sensor).unwrap();
            edges += p.graph.edge_count();
            let vis = viewpoint_visibility(&scene, p.graph.nodes(), &resolved.sensor);
            let (a, b, c) = match (gns(&p.graph, &resolved.search), baseline_greedy_viewpoints(&p.graph, &vis, &resolved.search), baseline_vpp_tsp(&p.graph, &vis, &resolved.search)) {
                (Ok(a), Ok(b), Ok(c)) => (a, b, c),
                e => { println!("n={} d={}: failure {:?}", n_vp, d_pair, e.0.err().map(|x| x.to_string())); failed = true; break; }
            };
            gl += a.total_length; bl += b.total_length; vl += c.total_length;
        }
        if !failed {
            let t = trials as f64;
            println!("n={:5} d_pair={:4.1} edges~{:6}: gns {:6.1} greedy {:6.1} vpp {:6.1}  ratio {:.2}",
                n_vp, d_pair, edges / trials as usize, gl/t, bl/t, vl/t, (gl/t)/(bl/t));
        }
    }
}
