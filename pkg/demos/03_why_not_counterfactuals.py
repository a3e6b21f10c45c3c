"""Answer "why not a lower risk?" with concrete, bounded lab changes.

The search only moves modifiable labs, stays inside the 1st–99th percentile
envelope of the training cohort, and every suggestion is locally minimal:
undo any single change and the risk crosses back.
"""

from _artifacts import load_or_build, riskiest_record

from riskscope import CfConstraints, apply_counterfactual, find_counterfactuals


def main() -> None:
    model, cohort = load_or_build()
    outcome = "acute_kidney_injury"
    patient, risk = riskiest_record(model, cohort, outcome)

    threshold = round(max(0.1, risk - 0.15), 2)
    print(f"patient {patient.id}: predicted {outcome} risk {risk:.1%}")
    print(f"question: what would move this below {threshold:.0%}?\n")

    constraints = CfConstraints.from_training(
        cohort, threshold=threshold, direction="decrease"
    )
    results = find_counterfactuals(
        model, patient, outcome, constraints, k=3, budget=20_000, seed=0
    )
    if not results:
        print("no qualifying change found within the search budget")
        return

    for i, result in enumerate(results, 1):
        print(f"suggestion {i}: risk {result.original_risk:.1%} -> {result.new_risk:.1%}")
        for change in result.changes:
            lo, hi = constraints.bound_of(change.feature)
            print(
                f"   set {change.feature}: {change.raw_display} -> {change.new_display}"
                f"   (cohort envelope {lo:.2f}-{hi:.2f} {change.unit})"
            )
        rescored = model.predict_records([apply_counterfactual(model.schema, patient, result)])
        k = model.schema.outcome_index(outcome)
        print(f"   independent re-score: {float(rescored[0][k]):.1%}\n")


if __name__ == "__main__":
    main()
