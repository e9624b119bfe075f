"""Shared pytest hooks: acceptance-suite summary lines.

Every acceptance criterion gets exactly one PASS/FAIL line in the terminal
summary so a run's verdict can be read without scanning the full log.
"""

ACCEPTANCE_LABELS = {
    "test_c01_exactly_n_invariant": "exactly-N crops per line on 1,000 seeded lines, under 60 s",
    "test_c02_segmentation_superiority": "CC beats projection by >= 15 pp; CC >= 0.95 on clean subset",
    "test_c03_otsu_oracle": "otsu_threshold == exhaustive maximizer on 200 random images",
    "test_c04_gap_selection_oracle": "select_boundaries == widest-gaps oracle on 500 random gap lists",
    "test_c05_config_fidelity": "default config serializes to the documented constants",
    "test_c06_stage4_truth_table": "length-stratified OCR gate truth table (9 cases)",
    "test_c07_edit_distance_oracle": "levenshtein == brute-force DP on 10,000 pairs; CER('з','33') = 2.0",
    "test_c08_frechet_correctness": "Frechet identity/closed-form/symmetry; matrix sqrt reconstruction",
    "test_c09_assembly_postconditions": "alignment post-condition, idempotent brightness, exact strip width",
    "test_c10_oversample_arithmetic": "max-factor multiplicities; identity without rare letters",
    "test_c11_determinism": "segment/filter/balance/assemble reruns byte-identical",
}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if getattr(rep, "when", "call") != "call":
                continue
            name = rep.nodeid.split("::")[-1].split("[")[0]
            if "test_acceptance.py" in rep.nodeid and name in ACCEPTANCE_LABELS:
                lines.append((name, outcome == "passed"))
    if not lines:
        return
    tr = terminalreporter
    tr.write_sep("=", "acceptance criteria")
    for name, ok in sorted(lines):
        label = ACCEPTANCE_LABELS[name]
        if ok:
            tr.write_line(f"PASS  {label}", green=True)
        else:
            tr.write_line(f"FAIL  {label}", red=True)
