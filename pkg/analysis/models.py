import math

from django.db import models


class ComparisonRecord(models.Model):
    """
    One persisted comparison between the reference solution and the limit profile
    """
    study = models.CharField(max_length=50, help_text="Subcommand or study that produced the row")
    config_digest = models.CharField(max_length=64, blank=True, help_text="SHA-256 of the normalized run configuration")

    epsilon = models.FloatField()
    order = models.PositiveIntegerField(help_text="Truncation order P")
    t = models.FloatField(help_text="Slow time of the comparison")

    # Norms are empty when the run failed
    l1 = models.FloatField(null=True, blank=True)
    l2 = models.FloatField(null=True, blank=True)
    linf = models.FloatField(null=True, blank=True)

    runtime_s = models.FloatField(default=0.0)
    steps = models.PositiveIntegerField(default=0)
    error = models.TextField(blank=True)

    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at', 'epsilon', 'order', 't']
        indexes = [
            models.Index(fields=['study', 'config_digest'], name='analysis_study_digest_idx'),
        ]

    def __str__(self):
        return f"{self.study}: eps={self.epsilon:g} P={self.order} t={self.t:g}"

    @property
    def failed(self):
        return bool(self.error)

    @classmethod
    def from_report(cls, report, study, config_digest=''):
        def norm(value):
            return None if math.isnan(value) else value

        return cls(
            study=study,
            config_digest=config_digest,
            epsilon=report.epsilon,
            order=report.order,
            t=report.t,
            l1=norm(report.l1),
            l2=norm(report.l2),
            linf=norm(report.linf),
            runtime_s=report.runtime_s,
            steps=report.steps,
            error=report.error,
        )

    @classmethod
    def record(cls, reports, study, config_digest=''):
        return cls.objects.bulk_create([cls.from_report(r, study, config_digest) for r in reports])
