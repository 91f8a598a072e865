//! Platform shares for six published footprints, cell by cell.

use telemetry_anomaly::costmodel::{budget_report, budget_table, BudgetRow, PlatformBudget};

/// `(ram_kb, rom_kb, [cubesat ram, cubesat rom, ops-sat ram, ops-sat rom])`
const SYSTEMS: [(u64, u64, [&str; 4]); 6] = [
    (1606, 1268, ["9.80", "1.93", "0.15", "0.02"]),
    (8193, 4902, ["50.01", "7.48", "0.78", "0.06"]),
    (2043, 1294, ["12.47", "1.97", "0.19", "0.02"]),
    (122, 149, ["0.74", "0.23", "0.01", "< 0.01"]),
    (1024, 508, ["6.25", "0.78", "0.10", "0.01"]),
    (59, 166, ["0.36", "0.25", "0.01", "< 0.01"]),
];

#[test]
fn all_cells_match() {
    let cube = PlatformBudget::cubesat();
    let ops = PlatformBudget::ops_sat();
    for (ram, rom, cells) in SYSTEMS {
        let c = budget_report(ram, rom, &cube);
        let o = budget_report(ram, rom, &ops);
        let got = [c.ram_pct, c.rom_pct, o.ram_pct, o.rom_pct];
        assert_eq!(got, cells.map(String::from), "{ram} KB / {rom} KB");
    }
}

#[test]
fn table_carries_every_cell() {
    let rows: Vec<BudgetRow> = SYSTEMS
        .iter()
        .enumerate()
        .map(|(i, &(ram_kb, rom_kb, _))| BudgetRow {
            system: format!("s{i}"),
            ram_kb,
            rom_kb,
        })
        .collect();
    let table = budget_table(&rows, &PlatformBudget::builtin());
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 7);
    for (line, (_, _, cells)) in lines[1..].iter().zip(SYSTEMS) {
        // "< 0.01" holds a single space, columns are split on two
        let tail: String = line
            .split("  ")
            .filter(|s| !s.is_empty())
            .map(str::trim)
            .skip(3)
            .collect::<Vec<_>>()
            .join("|");
        assert_eq!(tail, cells.join("|"), "{line}");
    }
}
