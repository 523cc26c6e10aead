"""
Database models and shared enumerations for the election sentiment pipeline.

The pipeline itself works on files; the database keeps an index of runs and
of every self-labeling iteration so that any artifact can be traced back to
the command, configuration and seeds that produced it.
"""
from django.db import models


class Party(models.TextChoices):
    ANC = 'ANC', 'ANC'
    DA = 'DA', 'DA'
    EFF = 'EFF', 'EFF'
    ACTIONSA = 'ActionSA', 'ActionSA'
    OTHER = 'Other', 'Other'

    @classmethod
    def main_parties(cls):
        """The four parties that make up the prediction set (role B)."""
        return [cls.ANC, cls.DA, cls.EFF, cls.ACTIONSA]


class Sentiment(models.TextChoices):
    POSITIVE = 'positive', 'Positive'
    NEGATIVE = 'negative', 'Negative'
    ABSTAIN = 'abstain', 'Abstain'

    @classmethod
    def classes(cls):
        """Class order used for every label distribution column."""
        return [cls.POSITIVE, cls.NEGATIVE]

    def flipped(self):
        if self == Sentiment.POSITIVE:
            return Sentiment.NEGATIVE
        if self == Sentiment.NEGATIVE:
            return Sentiment.POSITIVE
        return self


class Role(models.TextChoices):
    A = 'A', 'Dataset A - full corpus'
    B = 'B', 'Dataset B - four-party prediction set'
    C = 'C', 'Dataset C - annotated training set'
    D = 'D', 'Dataset D - annotated hold-out set'
    SYNTHETIC = 'Synthetic', 'Synthetic'


class Provenance(models.TextChoices):
    MANUAL = 'manual', 'Manual annotation'
    MACHINE = 'machine', 'Machine labeled'


class EmbedMode(models.TextChoices):
    SKIPGRAM = 'sg', 'Skip-gram'
    CBOW = 'cbow', 'CBOW'


class TimeStampedModel(models.Model):
    """Abstract base to track created/updated timestamps."""
    created_at = models.DateTimeField(auto_now_add=True)
    updated_at = models.DateTimeField(auto_now=True)

    class Meta:
        abstract = True


class PipelineRun(TimeStampedModel):
    """
    One management command invocation.

    Mirrors the manifest file written next to the run's artifacts. The
    manifest is the reproducibility record; this row only indexes it.
    """
    STATUS_RUNNING = 'running'
    STATUS_OK = 'ok'
    STATUS_FAILED = 'failed'
    STATUS_HALTED = 'halted'
    STATUS_CHOICES = [
        (STATUS_RUNNING, 'Running'),
        (STATUS_OK, 'Succeeded'),
        (STATUS_FAILED, 'Failed'),
        (STATUS_HALTED, 'Halted by guard'),
    ]

    command = models.CharField(max_length=50)
    config_digest = models.CharField(max_length=64)
    seeds = models.JSONField(default=dict, blank=True)
    input_digests = models.JSONField(default=dict, blank=True)
    output_digests = models.JSONField(default=dict, blank=True)
    manifest_path = models.CharField(max_length=500, blank=True)
    status = models.CharField(max_length=10, choices=STATUS_CHOICES, default=STATUS_RUNNING)
    exit_code = models.IntegerField(default=0)

    class Meta:
        ordering = ['-created_at', '-id']

    def __str__(self):
        return f"{self.command} [{self.status}] {self.config_digest[:12]}"

    def finish(self, status, exit_code=0, output_digests=None):
        self.status = status
        self.exit_code = exit_code
        if output_digests is not None:
            self.output_digests = output_digests
        self.save(update_fields=['status', 'exit_code', 'output_digests', 'updated_at'])


class LabelingIteration(TimeStampedModel):
    """
    AUDIT ONLY - one self-labeling iteration.

    Same content as the AuditLog JSONL record. Never read back by the
    pipeline; replay works from the JSONL file.
    """
    run = models.ForeignKey(PipelineRun, on_delete=models.CASCADE, related_name='iterations')
    iteration = models.PositiveIntegerField()
    batch_size = models.PositiveIntegerField()
    pool_size = models.PositiveIntegerField()
    abstain_count = models.PositiveIntegerField(default=0)
    holdout_f1_before = models.FloatField(null=True, blank=True)
    holdout_f1_after = models.FloatField(null=True, blank=True)
    accepted = models.BooleanField(default=True)
    record = models.JSONField(default=dict)

    class Meta:
        ordering = ['run', 'iteration']
        unique_together = [['run', 'iteration']]

    def __str__(self):
        verdict = 'accepted' if self.accepted else 'rejected'
        return f"Iteration {self.iteration} of run {self.run_id} ({verdict})"
