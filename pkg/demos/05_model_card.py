"""Answer "how does the model work, and for whom?" with a model card.

The card documents cohort composition, per-outcome discrimination, and
global feature importance overall and within demographic subgroups — the
"how" disclosure that belongs next to any deployed risk model. Rebuilding
it from the same inputs reproduces it byte for byte.
"""

from pathlib import Path

from _artifacts import OUT, load_or_build

from riskscope import CardConfig, build_model_card, render_html, render_markdown


def main() -> None:
    model, cohort = load_or_build()
    split = int(len(cohort) * 0.7)
    dev = cohort.subset(range(split))
    val = cohort.subset(range(split, len(cohort)))

    card = build_model_card(
        model, dev, val, CardConfig(importance_sample=400, importance_seed=0)
    )

    print("cohort snapshot:")
    for table in card.cohorts:
        print(
            f"  {table.split:<12} {table.n_encounters} encounters, "
            f"mean age {table.age_mean:.1f} ± {table.age_sd:.1f}"
        )
    aki = card.auroc["acute_kidney_injury"]
    print(f"\nvalidation AUROC (acute kidney injury): {aki.auroc:.3f}")

    print("\ntop-5 features by mean |SHAP|:")
    for name, value in card.importance_overall[:5]:
        print(f"  {name:<24} {value:.4f}")
    for grouping in card.groupings:
        labels = card.importance_groups[grouping.name]
        leaders = {label: ranking[0][0] for label, ranking in labels.items()}
        print(f"  subgroup leaders by {grouping.name}: {leaders}")

    md_path = Path(OUT) / "model_card.md"
    html_path = Path(OUT) / "model_card.html"
    md_path.write_text(render_markdown(card), encoding="utf-8")
    html_path.write_text(render_html(card), encoding="utf-8")
    print(f"\nwrote {md_path.name} and {html_path.name} to {OUT}/")


if __name__ == "__main__":
    main()
