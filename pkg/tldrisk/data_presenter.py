import logging
from typing import List, Optional, Sequence
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
import seaborn as sns
from tldrisk.models import AssessmentRow, AttackCatalog, KNOWN_DEVICE_CLASSES, PatternCatalog

logger = logging.getLogger(__name__)

# Risk levels drawn as dotted iso-risk curves (likelihood x severity = level).
ISO_RISK_LEVELS = (0.5, 1.0, 2.0, 3.0)
SEVERITY_AXIS_MAX = 5.0

def generate_risk_figure(
        rows: Sequence[AssessmentRow],
        path: Optional[str] = None,
) -> plt.Figure:
    """
    Generates a matplotlib scatterplot of shifted likelihood against severity.

    Each point is an attack, labelled by its id and coloured by device class.
    Dotted curves mark constant risk, so attacks further up and to the right
    are the ones ranked first.

    Args:
        rows (Sequence[AssessmentRow]): Assessed attacks.
        path (str): When given, the figure is saved here (png, svg or pdf) instead of shown.

    Returns:
        figure (plt.Figure): The figure.
    """
    fig, ax = plt.subplots(figsize=(7, 5), dpi=80)

    likelihoods = np.linspace(0.01, 1.0, 200)
    for level in ISO_RISK_LEVELS:
        severities = level / likelihoods
        visible = severities <= SEVERITY_AXIS_MAX
        ax.plot(likelihoods[visible], severities[visible], color="gray", linestyle=":", linewidth=0.8)
        ax.annotate(f"risk {level:g}",
            (likelihoods[visible][-1], severities[visible][-1]),
            xytext=(2, 2),
            color="gray",
            fontsize=7,
            textcoords='offset points')

    if rows:
        df = pd.DataFrame([row.model_dump() for row in rows])
        devices = [d for d in KNOWN_DEVICE_CLASSES if d in set(df["device"])]
        devices += sorted(set(df["device"]) - set(devices))
        # Ref: https://matplotlib.org/stable/users/explain/colors/colormaps.html#qualitative
        palette = dict(zip(devices, sns.color_palette("Set1", n_colors=len(devices))))
        for device in devices:
            points = df[df["device"] == device]
            ax.scatter(
                points["likelihood_shifted"],
                points["severity"],
                s=20,
                alpha=0.8,
                color=palette[device],
                label=device,
            )
        for _, row in df.iterrows():
            ax.annotate(row["attack_id"],
                (row["likelihood_shifted"], row["severity"]),
                xytext=(2, 2),
                color="gray",
                textcoords='offset points')
        ax.legend(title="Device", loc="lower right")

    ax.set_xlim(0.0, 1.0)
    ax.set_ylim(0.0, SEVERITY_AXIS_MAX)
    ax.set_xlabel("Likelihood (shifted)")
    ax.set_ylabel("Severity")

    if path is not None:
        fig.savefig(path, bbox_inches="tight")
        logger.debug("Saved risk figure to %s", path)
        plt.close(fig)
    else:
        plt.show()

    return fig

def generate_mapping_matrix(attacks: AttackCatalog, patterns: Optional[PatternCatalog] = None) -> pd.DataFrame:
    """
    Generates the attack x pattern incidence matrix: 1 where an attack maps into a pattern.

    Columns follow the pattern catalog's order when one is given, otherwise sorted pattern ids.
    """
    if patterns is not None:
        columns: List[str] = list(patterns.patterns)
    else:
        columns = sorted(set().union(*(a.capec_refs for a in attacks.attacks.values())))
    matrix = pd.DataFrame(
        [[int(pattern_id in attack.capec_refs) for pattern_id in columns] for attack in attacks.attacks.values()],
        index=pd.Index(list(attacks.attacks), name="attack"),
        columns=pd.Index(columns, name="pattern"),
    )
    return matrix

def generate_mapping_heatmap(
        attacks: AttackCatalog,
        patterns: Optional[PatternCatalog] = None,
        path: Optional[str] = None,
) -> plt.Figure:
    """Draws the attack x pattern incidence matrix as a heatmap."""
    matrix = generate_mapping_matrix(attacks, patterns)

    sns.set_style('white')
    sns.set_theme(font_scale=.7)
    fig, ax = plt.subplots(figsize=(8, 10))
    sns.heatmap(matrix, cmap="Blues", cbar=False, linewidths=0.5, linecolor="white", ax=ax)

    if path is not None:
        fig.savefig(path, bbox_inches="tight")
        logger.debug("Saved mapping heatmap to %s", path)
        plt.close(fig)
    else:
        plt.show()

    return fig
