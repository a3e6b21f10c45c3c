"""Answer "why is this patient high risk?" two ways: LIME and SHAP.

Both methods attribute one patient's predicted risk to the features that
drove it. LIME fits a local weighted surrogate over perturbed neighbors;
SHAP walks the trees exactly. Agreement between them is the sanity check
a bedside display needs before showing either.
"""

from _artifacts import load_or_build, riskiest_record

from riskscope import LimeConfig, explain_lime, explain_shap_tree


def show(attribution, top: int = 6) -> None:
    print(f"  prediction {attribution.prediction:.1%}  (baseline {attribution.base_value:.1%})")
    for c in attribution.contributions[:top]:
        direction = "raises" if c.value > 0 else "lowers"
        print(f"    {c.value:+.4f}  {c.condition:<40} {direction} risk")


def main() -> None:
    model, cohort = load_or_build()
    outcome = "acute_kidney_injury"
    patient, risk = riskiest_record(model, cohort, outcome)
    print(f"patient {patient.id}: predicted {outcome} risk {risk:.1%}\n")

    print("LIME (local surrogate over 5,000 perturbed neighbors):")
    lime = explain_lime(
        model, patient, outcome, LimeConfig(n_samples=5_000, top_k=8, seed=0), dataset=cohort
    )
    show(lime)
    print(f"    surrogate fit R² = {lime.details['r2']:.3f}")

    print("\nSHAP (exact tree-path attribution):")
    shap = explain_shap_tree(model, patient, outcome)
    show(shap)
    total = shap.base_value + sum(c.value for c in shap.contributions)
    print(f"    attributions + baseline = {total:.1%} (reconstructs the prediction exactly)")

    lime_top = {c.feature for c in lime.contributions[:4]}
    shap_top = {c.feature for c in shap.contributions[:4]}
    print(f"\ntop-4 agreement between methods: {sorted(lime_top & shap_top)}")


if __name__ == "__main__":
    main()
