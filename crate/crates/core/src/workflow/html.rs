use std::fmt::Write as _;

use super::svg::escape;
use super::{ReportBundle, WorkflowPlan};

const STYLE: &str = "body{font-family:sans-serif;max-width:1000px;margin:2em auto;color:#222}\
table{border-collapse:collapse;margin:1em 0}td,th{border:1px solid #bbb;padding:3px 8px;text-align:left}\
pre{background:#f4f4f4;padding:1em;overflow-x:auto}\
.badge{display:inline-block;padding:4px 14px;border-radius:12px;color:#fff;font-weight:bold}\
figure{margin:1.5em 0}";

fn row(out: &mut String, cells: &[String]) {
    out.push_str("<tr>");
    for c in cells {
        write!(out, "<td>{}</td>", escape(c)).unwrap();
    }
    out.push_str("</tr>\n");
}

fn header(out: &mut String, cells: &[&str]) {
    out.push_str("<tr>");
    for c in cells {
        write!(out, "<th>{}</th>", escape(c)).unwrap();
    }
    out.push_str("</tr>\n");
}

/// Flags that reproduce the model part of the run with the CLI.
pub(crate) fn reproduction_command(plan: &WorkflowPlan, benchmarks: bool) -> String {
    let s = &plan.spec;
    let sizes: Vec<String> = plan.sizes.iter().map(|n| n.to_string()).collect();
    let mut cmd = format!(
        "stencilkit workflow --dim {} --radius {} --kind {} --weighting {} --coeff {} --dtype {} \
         --machine {}.toml --sizes {} --step {} --threads {} --block-level {} --memory-budget {} \
         --safety {} --lc-accounting {}",
        s.dimensions,
        s.radius,
        s.kind,
        s.weighting,
        s.storage,
        s.element,
        plan.machine.name,
        sizes.join(","),
        plan.step,
        plan.threads,
        plan.block_level,
        plan.memory_budget,
        plan.lc.safety,
        plan.lc.accounting,
    );
    if benchmarks {
        cmd.push_str(" --with-benchmarks");
    }
    cmd.push_str(" --out-dir report");
    cmd
}

/// Single-file HTML page with plots inlined.
pub fn render_html(bundle: &ReportBundle, plan: &WorkflowPlan, invocation: &str, t_comp: f64, t_reg_l1: f64) -> String {
    let s = &plan.spec;
    let m = &plan.machine;
    let mut h = String::new();
    writeln!(
        h,
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>{}</title>\n<style>{STYLE}</style>\n</head>\n<body>",
        escape(&s.label())
    )
    .unwrap();
    writeln!(h, "<h1>{} on {}</h1>", escape(&s.label()), escape(&m.name)).unwrap();
    writeln!(
        h,
        "<p><span class=\"badge status-{st}\" style=\"background:{}\">{st}</span> {}</p>",
        bundle.status.color(),
        escape(&bundle.comment),
        st = bundle.status
    )
    .unwrap();

    h.push_str("<h2>Stencil</h2>\n<table>\n");
    for (k, v) in [
        ("dimensions", s.dimensions.to_string()),
        ("radius", s.radius.to_string()),
        ("kind", s.kind.to_string()),
        ("weighting", s.weighting.to_string()),
        ("coefficients", s.storage.to_string()),
        ("data type", s.element.to_string()),
        ("points", s.point_count().to_string()),
        ("T_comp [cy/CL]", format!("{t_comp}")),
        ("T_RegL1 [cy/CL]", format!("{t_reg_l1}")),
    ] {
        row(&mut h, &[k.to_string(), v]);
    }
    h.push_str("</table>\n");
    writeln!(
        h,
        "<h3>Generated kernel</h3>\n<pre><code>{}</code></pre>",
        escape(&bundle.kernel_source)
    )
    .unwrap();

    writeln!(h, "<h2>Layer conditions at N = {}</h2>\n<table>", plan.n_max).unwrap();
    header(
        &mut h,
        &[
            "level",
            "class",
            "requirement",
            "bytes",
            "effective size [B]",
            "holds",
            "break N",
        ],
    );
    for c in &bundle.conditions {
        row(
            &mut h,
            &[
                c.level.clone(),
                c.dimensionality.to_string(),
                c.requirement.clone(),
                format!("{}", c.requirement_bytes),
                format!("{}", c.effective_size_bytes),
                c.holds.to_string(),
                c.break_size.to_string(),
            ],
        );
    }
    h.push_str("</table>\n");

    h.push_str("<h2>Plots</h2>\n");
    for (name, svg) in &bundle.plots {
        writeln!(h, "<figure id=\"{}\">\n{}</figure>", escape(name), svg).unwrap();
    }
    h.push_str("<h2>Data</h2>\n<ul>\n");
    for name in bundle.tables.keys() {
        writeln!(h, "<li><a href=\"{n}\">{n}</a></li>", n = escape(name)).unwrap();
    }
    h.push_str("</ul>\n");
    if !bundle.notices.is_empty() {
        h.push_str("<h3>Notices</h3>\n<ul>\n");
        for n in &bundle.notices {
            writeln!(h, "<li>{}</li>", escape(n)).unwrap();
        }
        h.push_str("</ul>\n");
    }

    h.push_str("<h2>Machine</h2>\n<table>\n");
    for (k, v) in [
        ("name", m.name.clone()),
        ("clock [Hz]", format!("{}", m.clock_hz)),
        ("cores per socket", m.cores_per_socket.to_string()),
        ("cores per NUMA domain", m.cores_per_numa_domain.to_string()),
        ("overlap policy", m.overlap_policy.to_string()),
        (
            "memory bandwidth per domain [B/s]",
            format!("{}", m.memory.bandwidth_numa_domain_bytes_per_s),
        ),
        ("compiler flags", m.compiler_flags.clone()),
        ("machine file sha256", bundle.machine_digest.clone()),
    ] {
        row(&mut h, &[k.to_string(), v]);
    }
    h.push_str("</table>\n<table>\n");
    header(
        &mut h,
        &[
            "level",
            "size [B]",
            "ways",
            "line [B]",
            "upstream [B/cy]",
            "victim",
            "inclusive",
        ],
    );
    for l in m.levels() {
        row(
            &mut h,
            &[
                l.name.clone(),
                l.size_bytes.to_string(),
                l.ways.to_string(),
                l.line_size_bytes.to_string(),
                l.upstream_bandwidth_bytes_per_cycle
                    .map(|b| format!("{b}"))
                    .unwrap_or_else(|| "-".into()),
                l.victim.to_string(),
                l.inclusive.to_string(),
            ],
        );
    }
    h.push_str("</table>\n");

    h.push_str("<h2>Reproduction</h2>\n");
    if !invocation.is_empty() {
        writeln!(
            h,
            "<p>Invocation:</p>\n<pre class=\"invocation\">{}</pre>",
            escape(invocation)
        )
        .unwrap();
    }
    let benchmarks = bundle.rows.iter().any(|r| r.benchmark_cycles.is_some());
    writeln!(
        h,
        "<p>Equivalent command with every flag spelled out (check the machine file against the digest above):</p>\n<pre>{}</pre>",
        escape(&reproduction_command(plan, benchmarks))
    )
    .unwrap();
    h.push_str("</body>\n</html>\n");
    h
}
