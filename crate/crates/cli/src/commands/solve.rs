//! `solve`: kernel columns for the requested variants, sources and times.

use std::fmt::Write as _;
use std::time::Instant;

use kernelbound::solver::io::{save_kernel, write_kernel_csv};
use kernelbound::solver::{assemble, kernel_columns, Propagator};

use super::Ctx;
use crate::config::Format;
use crate::error::{CliError, CliResult};

pub fn run(ctx: &mut Ctx<'_>) -> CliResult<bool> {
    let family = ctx.cfg.require_family("solve")?;
    let gcfg = ctx.cfg.require_grid("solve")?;
    let scfg = ctx.cfg.require_solve("solve")?;
    let spec = family.operator();
    let m = family.dims().m;
    let grid = gcfg.main_grid()?;
    grid.check_budget(m, gcfg.max_unknowns)?;
    let settings = ctx.settings(gcfg);
    let nodes = scfg
        .sources
        .iter()
        .map(|(y, k)| {
            grid.node_at(y).map(|n| (n, *k)).ok_or_else(|| {
                ctx.cfg.error_at("solve", "sources", format!("source {y:?} is not an interior grid node"))
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let dir = ctx.out.subdir("kernels")?;
    let mut index = String::from("file,variant,y,k,t,total_mass\n");
    let mut count = 0usize;
    for &variant in &scfg.variants {
        if nodes.is_empty() {
            break;
        }
        let start = Instant::now();
        let op = assemble(&spec, variant, &grid)?;
        let dt = settings.dt_for(&scfg.times, grid.mesh);
        let prop = Propagator::new(&op, settings.theta, dt, &scfg.times)?;
        let cols = kernel_columns(&prop, &nodes, settings.width(&grid), settings.exec)?;
        for (si, per_time) in cols.iter().enumerate() {
            for (ti, kf) in per_time.iter().enumerate() {
                let stem = format!("{}_s{}_k{}_t{}", variant.name(), si + 1, kf.k + 1, ti + 1);
                let bin = dir.join(format!("{stem}.bin"));
                save_kernel(&bin, kf)?;
                ctx.out.record(bin);
                if ctx.out.wants(Format::Csv) {
                    let mut buf = Vec::new();
                    write_kernel_csv(&mut buf, kf)?;
                    let text = String::from_utf8(buf).map_err(|e| CliError::Usage(e.to_string()))?;
                    ctx.out.write(&format!("kernels/{stem}.csv"), &text)?;
                }
                let _ = writeln!(
                    index,
                    "{stem}.bin,{},{},{},{},{:e}",
                    variant.name(),
                    kf.source.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" "),
                    kf.k + 1,
                    kf.time(),
                    kf.total_mass()
                );
                count += 1;
            }
        }
        ctx.out.progress(&format!(
            "solved {} columns of {} on {} nodes (dt = {dt:e}) in {:.2}s",
            nodes.len(),
            variant.name(),
            grid.num_nodes(),
            start.elapsed().as_secs_f64()
        ));
    }
    ctx.out.write("kernels/index.csv", &index)?;
    println!("kernel store: {count} fields in {}", dir.display());
    Ok(true)
}
