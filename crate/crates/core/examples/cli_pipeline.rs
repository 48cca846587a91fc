// The command-line pipeline driven in-process: generate a dataset, rebuild
// paths from its target images and draw overlays. Equivalent shell session:
//
// ```bash
// raydio gen-dataset --config run.toml --out data
// raydio reconstruct --images data/targets --manifest data/manifest.jsonl --out report.json
// raydio plot --report report.json --out figs
// ```

use raydio::cli::run;

fn raydio(args: &[&str]) -> (i32, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(std::iter::once("raydio").chain(args.iter().copied()), &mut out, &mut err);
    print!("{}", String::from_utf8_lossy(&err));
    (code, String::from_utf8_lossy(&out).into_owned())
}

pub fn run_example() -> Result<Vec<i32>, String> {
    let dir = std::env::temp_dir().join(format!("raydio-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let config = dir.join("run.toml");
    std::fs::write(
        &config,
        "[dataset]\nscenes = [\"lshape\"]\nn_tx = 2\nn_rx_per_tx = 3\nimage_size = 256\nsplit_ratios = [0.5, 0.5, 0.0]\n",
    )
    .map_err(|e| e.to_string())?;
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();

    let mut codes = Vec::new();
    for args in [
        vec!["gen-dataset", "--config", &p("run.toml"), "--out", &p("data"), "--jobs", "2"],
        vec!["reconstruct", "--images", &p("data/targets"), "--manifest", &p("data/manifest.jsonl"), "--out", &p("report.json")],
        vec!["plot", "--report", &p("report.json"), "--out", &p("figs"), "--size", "256"],
    ] {
        println!("$ raydio {}", args.join(" "));
        let (code, stdout) = raydio(&args);
        print!("{stdout}");
        codes.push(code);
    }
    let _ = std::fs::remove_dir_all(&dir);
    Ok(codes)
}

#[allow(dead_code)]
fn main() {
    let codes = run_example().expect("pipeline failed");
    println!("exit codes {codes:?}");
}
