//! MATPOWER case-file reader (version 2 layout: `mpc.baseMVA`, `mpc.bus`,
//! `mpc.gen`, `mpc.branch`). Other fields such as `gencost` are skipped.

use num_complex::Complex64;

use super::{Branch, Bus, BusKind, Network};
use crate::error::{Error, Result};

const BUS_COLS: usize = 13;
const GEN_COLS: usize = 10;
const BRANCH_COLS: usize = 11;

#[derive(Debug)]
struct Cell {
    value: f64,
    line: usize,
    column: usize,
}

type Row = Vec<Cell>;

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('%') {
        Some(k) => &line[..k],
        None => line,
    }
}

/// Collects the rows of the matrix literal that starts after `[` on `start`.
fn read_matrix(lines: &[&str], start: usize, open_col: usize) -> Result<(Vec<Row>, usize)> {
    let mut rows = Vec::new();
    let mut current: Row = Vec::new();
    let mut lineno = start;
    let mut first = true;
    while lineno < lines.len() {
        let raw = strip_comment(lines[lineno]);
        let (offset, body) = if first {
            (open_col + 1, &raw[open_col + 1..])
        } else {
            (0, raw)
        };
        first = false;
        let mut closed = false;
        let mut col = offset;
        for piece in body.split_inclusive(|c: char| c == ';' || c == ']' || c.is_whitespace() || c == ',') {
            let token = piece.trim_end_matches(|c: char| c == ';' || c == ']' || c.is_whitespace() || c == ',');
            if !token.is_empty() {
                let value: f64 = token
                    .parse()
                    .map_err(|_| parse_err(lineno + 1, col + 1, format!("bad number '{token}'")))?;
                current.push(Cell {
                    value,
                    line: lineno + 1,
                    column: col + 1,
                });
            }
            let last = piece.chars().last();
            if matches!(last, Some(';') | Some(']')) && !current.is_empty() {
                rows.push(std::mem::take(&mut current));
            }
            col += piece.len();
            if last == Some(']') {
                closed = true;
                break;
            }
        }
        if !closed && !current.is_empty() {
            // a newline also terminates a row
            rows.push(std::mem::take(&mut current));
        }
        if closed {
            return Ok((rows, lineno));
        }
        lineno += 1;
    }
    Err(parse_err(start + 1, open_col + 1, "unterminated matrix"))
}

fn check_width(rows: &[Row], need: usize, what: &str) -> Result<()> {
    for row in rows {
        if row.len() < need {
            let cell = row.last().expect("rows are non-empty");
            return Err(parse_err(
                cell.line,
                cell.column,
                format!("{what} row has {} columns, need at least {need}", row.len()),
            ));
        }
    }
    Ok(())
}

fn as_index(cell: &Cell) -> Result<usize> {
    if cell.value < 0.0 || cell.value.fract() != 0.0 {
        return Err(parse_err(cell.line, cell.column, "expected a bus number"));
    }
    Ok(cell.value as usize)
}

/// Parses a MATPOWER case body into a per-unit [`Network`].
pub fn parse_case(text: &str) -> Result<Network> {
    let lines: Vec<&str> = text.lines().collect();
    let mut base_mva = None;
    let mut bus_rows = None;
    let mut gen_rows = None;
    let mut branch_rows = None;

    let mut k = 0;
    while k < lines.len() {
        let line = strip_comment(lines[k]);
        let trimmed = line.trim_start();
        if let Some(rest) = trimmed.strip_prefix("mpc.") {
            let name: String = rest
                .chars()
                .take_while(|c| c.is_alphanumeric() || *c == '_')
                .collect();
            let eq = line.find('=').ok_or_else(|| parse_err(k + 1, 1, "missing '='"))?;
            match name.as_str() {
                "baseMVA" => {
                    let value = line[eq + 1..].trim().trim_end_matches(';').trim();
                    base_mva = Some(value.parse::<f64>().map_err(|_| {
                        parse_err(k + 1, eq + 2, format!("bad baseMVA '{value}'"))
                    })?);
                }
                "bus" | "gen" | "branch" => {
                    let open = line[eq..]
                        .find('[')
                        .map(|c| c + eq)
                        .ok_or_else(|| parse_err(k + 1, eq + 1, "expected '['"))?;
                    let (rows, end) = read_matrix(&lines, k, open)?;
                    match name.as_str() {
                        "bus" => bus_rows = Some(rows),
                        "gen" => gen_rows = Some(rows),
                        _ => branch_rows = Some(rows),
                    }
                    k = end;
                }
                _ => {
                    if let Some(open) = line[eq..].find('[') {
                        let (_, end) = read_matrix(&lines, k, open + eq)?;
                        k = end;
                    }
                }
            }
        }
        k += 1;
    }

    let base_mva = base_mva.ok_or_else(|| parse_err(1, 1, "missing mpc.baseMVA"))?;
    if base_mva <= 0.0 {
        return Err(parse_err(1, 1, "baseMVA must be positive"));
    }
    let bus_rows = bus_rows.ok_or_else(|| parse_err(1, 1, "missing mpc.bus"))?;
    let gen_rows = gen_rows.unwrap_or_default();
    let branch_rows = branch_rows.ok_or_else(|| parse_err(1, 1, "missing mpc.branch"))?;
    check_width(&bus_rows, BUS_COLS, "bus")?;
    check_width(&gen_rows, GEN_COLS, "gen")?;
    check_width(&branch_rows, BRANCH_COLS, "branch")?;

    let mut buses = Vec::with_capacity(bus_rows.len());
    let mut index = std::collections::BTreeMap::new();
    let mut bus_vm = Vec::with_capacity(bus_rows.len());
    for row in &bus_rows {
        let id = as_index(&row[0])?;
        let kind = match row[1].value as i64 {
            1 => BusKind::PQ,
            2 => BusKind::PV,
            3 => BusKind::Slack,
            4 => {
                return Err(Error::Topology(format!(
                    "bus {id} is isolated; islands are not supported"
                )))
            }
            other => {
                return Err(parse_err(
                    row[1].line,
                    row[1].column,
                    format!("unknown bus type {other}"),
                ))
            }
        };
        let mut bus = Bus::new(id, kind);
        bus.p_load = row[2].value / base_mva;
        bus.q_load = row[3].value / base_mva;
        bus.shunt_g = row[4].value / base_mva;
        bus.shunt_b = row[5].value / base_mva;
        if index.insert(id, buses.len()).is_some() {
            return Err(parse_err(row[0].line, row[0].column, format!("duplicate bus {id}")));
        }
        bus_vm.push(row[7].value);
        buses.push(bus);
    }

    let mut q_bounded = vec![true; buses.len()];
    for row in &gen_rows {
        let id = as_index(&row[0])?;
        let &k = index
            .get(&id)
            .ok_or_else(|| parse_err(row[0].line, row[0].column, format!("generator at unknown bus {id}")))?;
        if row[7].value <= 0.0 {
            continue;
        }
        let bus = &mut buses[k];
        if !bus.has_generator {
            bus.q_min = 0.0;
            bus.q_max = 0.0;
            bus.v_setpoint = Some(row[5].value);
        }
        bus.has_generator = true;
        bus.p_gen += row[1].value / base_mva;
        bus.q_gen += row[2].value / base_mva;
        // MATPOWER uses +-9999 style sentinels for unbounded limits
        if row[3].value.abs() >= 9999.0 || row[4].value.abs() >= 9999.0 {
            q_bounded[k] = false;
        }
        bus.q_max += row[3].value / base_mva;
        bus.q_min += row[4].value / base_mva;
    }
    for (k, bus) in buses.iter_mut().enumerate() {
        if !q_bounded[k] {
            bus.q_min = f64::NEG_INFINITY;
            bus.q_max = f64::INFINITY;
        }
        match bus.kind {
            BusKind::PV if !bus.has_generator => bus.kind = BusKind::PQ,
            BusKind::Slack if bus.v_setpoint.is_none() => bus.v_setpoint = Some(bus_vm[k]),
            _ => {}
        }
        if !bus.has_generator {
            bus.q_min = f64::NEG_INFINITY;
            bus.q_max = f64::INFINITY;
        }
    }

    let mut branches = Vec::with_capacity(branch_rows.len());
    for row in &branch_rows {
        if row[10].value <= 0.0 {
            continue;
        }
        let from_id = as_index(&row[0])?;
        let to_id = as_index(&row[1])?;
        let lookup = |id: usize, cell: &Cell| {
            index
                .get(&id)
                .copied()
                .ok_or_else(|| parse_err(cell.line, cell.column, format!("branch to unknown bus {id}")))
        };
        let from = lookup(from_id, &row[0])?;
        let to = lookup(to_id, &row[1])?;
        let ratio = if row[8].value == 0.0 { 1.0 } else { row[8].value };
        let shift = row[9].value.to_radians();
        branches.push(Branch {
            from,
            to,
            series_impedance: Complex64::new(row[2].value, row[3].value),
            charging_b: row[4].value,
            tap: Complex64::from_polar(ratio, shift),
            origin: None,
        });
    }

    Network::new(base_mva, buses, branches)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_BUS: &str = "
function mpc = two
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
    1   3   0   0   0   0   1   1.0   0   138  1  1.1  0.9;
    2   1   50  20  0   0   1   1.0   0   138  1  1.1  0.9;
];
mpc.gen = [
    1   0   0   100  -100  1.02  100  1  200  0;
];
mpc.branch = [
    1   2   0.01   0.1   0.02   0  0  0  0  0  1  -360  360;
];
";

    #[test]
    fn parses_two_bus_case() {
        let net = parse_case(TWO_BUS).unwrap();
        assert_eq!(net.len(), 2);
        assert_eq!(net.base_mva, 100.0);
        assert_eq!(net.buses[0].kind, BusKind::Slack);
        assert_eq!(net.buses[1].kind, BusKind::PQ);
        assert_eq!(net.buses[0].v_setpoint, Some(1.02));
        assert!((net.buses[1].p_load - 0.5).abs() < 1e-15);
        assert!((net.buses[1].q_load - 0.2).abs() < 1e-15);
        assert_eq!(net.branches.len(), 1);
        assert_eq!(net.branches[0].tap, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn two_slacks_is_topology_error() {
        let text = TWO_BUS.replace("2   1   50", "2   3   50");
        assert!(matches!(parse_case(&text), Err(Error::Topology(_))));
    }

    #[test]
    fn no_slack_is_topology_error() {
        let text = TWO_BUS.replace("1   3   0   0", "1   1   0   0");
        assert!(matches!(parse_case(&text), Err(Error::Topology(_))));
    }

    #[test]
    fn bad_number_reports_position() {
        let text = TWO_BUS.replace("0.01   0.1", "0.01   x0.1");
        match parse_case(&text) {
            Err(Error::Parse { line, column, .. }) => {
                assert_eq!(line, 13);
                assert!(column > 1);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn short_row_is_parse_error() {
        let text = TWO_BUS.replace("2   1   50  20  0   0   1   1.0   0   138  1  1.1  0.9;", "2 1 50;");
        assert!(matches!(parse_case(&text), Err(Error::Parse { .. })));
    }

    #[test]
    fn ieee118_dimensions() {
        let net = parse_case(include_str!("../../data/case118.m")).unwrap();
        assert_eq!(net.len(), 118);
        assert_eq!(net.base_mva, 100.0);
        assert_eq!(net.buses[net.slack()].id, 69);
        assert_eq!(net.branches.len(), 186);
        let pv = net.buses.iter().filter(|b| b.kind == BusKind::PV).count();
        assert_eq!(pv, 53);
    }
}
