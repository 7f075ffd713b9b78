//! `check`: base and family hypotheses.

use kernelbound::hypotheses::{check_base, check_family};

use super::Ctx;
use crate::config::Format;
use crate::error::CliResult;

pub fn run(ctx: &mut Ctx<'_>) -> CliResult<bool> {
    let family = ctx.cfg.require_family("check")?;
    let reports = [check_base(family), check_family(family)];
    let mut text = String::new();
    let mut csv = String::new();
    for (i, r) in reports.iter().enumerate() {
        text.push_str(&r.to_text());
        text.push('\n');
        let rows = r.margins_csv();
        csv.push_str(if i == 0 { &rows } else { rows.split_once('\n').map_or("", |(_, rest)| rest) });
        let line = format!("hypotheses {:<12} {}", r.id, r.status);
        match &r.witness {
            Some(w) => println!("{line}  witness: {w}"),
            None => println!("{line}"),
        }
    }
    ctx.out.write_as(Format::Text, "hypotheses.txt", &text)?;
    ctx.out.write_as(Format::Csv, "hypotheses.csv", &csv)?;
    Ok(reports.iter().all(|r| r.passed()))
}
