"""Mean API calls and cost in cents per dataset and method, from any number
of traces files.

    python scripts/cost_table.py runs/*/traces.jsonl
"""

import argparse

from inductor.harness import cost_report, format_table, read_traces


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("traces", nargs="+")
    args = ap.parse_args()
    records = [r for path in args.traces for r in read_traces(path)]
    print(format_table(cost_report(records)))


if __name__ == "__main__":
    main()
