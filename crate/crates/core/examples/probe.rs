use secest::experiment::*;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let which = args.get(1).map(|s| s.as_str()).unwrap_or("fig2");
    match which {
        "fig2" => {
            let trials: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(50);
            let seed: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(42);
            let mut cfg = sensor_sweep_config(seed);
            cfg.trials = trials;
            let t0 = Instant::now();
            let results = run_sensor_grid(&cfg).unwrap();
            println!("elapsed {:.1}s", t0.elapsed().as_secs_f64());
            print!("{}", results_to_csv(&results));
        }
        "power" => {
            let trials: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(30);
            let seed: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(42);
            let cfg = power_sweep_config(seed, trials);
            let t0 = Instant::now();
            let results = run_power_grid_experiment(&cfg).unwrap();
            println!("elapsed {:.1}s", t0.elapsed().as_secs_f64());
            print!("{}", results_to_csv(&results));
        }
        "fig4l" => {
            let trials: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(10);
            let cfg = actuator_sweep_config(42, trials, vec![0,1,2,3], vec![0,1,2,3]);
            let t0 = Instant::now();
            let results = run_actuator_grid(&cfg).unwrap();
            println!("elapsed {:.1}s", t0.elapsed().as_secs_f64());
            print!("{}", results_to_csv(&results));
        }
        "fig4r" => {
            let trials: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(10);
            let cfg = power_actuator_sweep_config(42, trials, vec![0,1,2], vec![0,2,5]);
            let t0 = Instant::now();
            let results = run_actuator_grid(&cfg).unwrap();
            println!("elapsed {:.1}s", t0.elapsed().as_secs_f64());
            print!("{}", results_to_csv(&results));
        }
        _ => eprintln!("unknown probe"),
    }
}
