import logging
from pathlib import Path
from typing import Union

from altair import Chart
from polars import DataFrame, col

logger = logging.getLogger(__name__)


class Visualization:
    """Handles the creation of evaluation charts, saved as standalone HTML."""

    @staticmethod
    def save_chart(chart: Chart, path: Union[str, Path]) -> Path:
        """Saves a chart as an HTML page.

        Args:
            chart: The chart to save.
            path: The target file.

        Returns:
            The path written.
        """
        path = Path(path)
        chart.save(str(path), format="html")
        logger.info("Saved chart to %s", path)
        return path

    @staticmethod
    def create_confusion_heatmap(data: DataFrame) -> Chart:
        """Creates a confusion-matrix heatmap.

        Args:
            data: Rows of (actual, predicted, count).
        """
        base = Chart(data).encode(x="predicted:N", y="actual:N")
        return base.mark_rect().encode(
            color="count:Q", tooltip=["actual", "predicted", "count"]
        ) + base.mark_text().encode(text="count:Q")

    @staticmethod
    def create_fold_accuracy_bar_chart(data: DataFrame) -> Chart:
        """Creates a bar chart of the accuracy of every evaluated fold.

        Args:
            data: The per-fold table of a cross-validation report.
        """
        evaluated = data.filter(col("skipped_reason").is_null() & col("accuracy").is_not_null())
        return (
            Chart(evaluated)
            .mark_bar()
            .encode(x="fold:O", y="accuracy:Q", tooltip=["fold", "accuracy", "f1"])
        )

    @staticmethod
    def create_fold_error_bar_chart(data: DataFrame) -> Chart:
        """Creates a bar chart of the MSE per evaluated fold.

        Args:
            data: The fold table.

        Returns:
            The chart, empty when no fold has regression metrics.
        """
        evaluated = data.filter(col("skipped_reason").is_null() & col("mse").is_not_null())
        return (
            Chart(evaluated)
            .mark_bar()
            .encode(x="fold:O", y="mse:Q", tooltip=["fold", "mse", "mae"])
        )

    @staticmethod
    def create_prediction_scatter_plot(data: DataFrame) -> Chart:
        """Creates a predicted-versus-true danger rating scatter plot.

        Args:
            data: The per-sample prediction table of a regressor.
        """
        return (
            Chart(data)
            .mark_circle()
            .encode(
                x="true_rating:Q",
                y="score:Q",
                color="true_label:N",
                tooltip=["video_id", "true_rating", "score"],
            )
        )
