"""Answer "what if we changed X?" and "what happened to patients like this?".

What-if re-scores a patient under hypothetical values without touching any
state. The similar-patient view grounds the number: among cohort patients
matched on age, demographics, procedure, and comorbidity profile, how many
actually had the complication?
"""

from _artifacts import load_or_build, riskiest_record

from riskscope import SimilarityCriteria, WhatIfRequest, cohort_summary, whatif_predict


def main() -> None:
    model, cohort = load_or_build()
    outcome = "acute_kidney_injury"
    patient, _ = riskiest_record(model, cohort, outcome)
    schema = model.schema

    creatinine = patient.value(schema, "creatinine")
    shown = "missing" if creatinine is None else f"{creatinine:g} mg/dL"
    print(f"patient {patient.id} (creatinine {shown})\n")

    print("what-if: creatinine back to 1.0 mg/dL, age unchanged")
    response = whatif_predict(
        model, WhatIfRequest(record=patient, overrides={"creatinine": 1.0})
    )
    for name in (outcome, "mortality_30d"):
        print(f"  {name:<24} {response.original[name]:.1%} -> {response.updated[name]:.1%}")
    for echo in response.overrides:
        print(f"  (override: {echo.feature} {echo.original:g} -> {echo.new:g})")

    print("\nsimilar patients (±5y age, same race/sex/procedure, ≥60% comorbidity overlap):")
    summary = cohort_summary(model, cohort, patient, SimilarityCriteria())
    if summary.count == 0:
        print("  none matched; relaxing to ±15y and sex only")
        summary = cohort_summary(
            model, cohort, patient,
            SimilarityCriteria(age_tolerance=15.0, exact_match=("sex",),
                               comorbidity_threshold=0.4),
        )
    print(f"  {summary.count} matched encounters")
    if summary.count:
        mean = summary.mean_predicted[outcome]
        print(f"  cohort mean predicted {outcome} risk: {mean:.1%}")
        if summary.observed_prevalence is not None:
            print(f"  observed rate among them:           {summary.observed_prevalence[outcome]:.1%}")
        print(f"  this patient:                       {summary.index_risks[outcome]:.1%}")


if __name__ == "__main__":
    main()
