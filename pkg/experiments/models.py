from django.db import models


class ExperimentRun(models.Model):
    STATUS_CHOICES = (
        ('pending', 'Pending'),
        ('running', 'Running'),
        ('completed', 'Completed'),
        ('failed', 'Failed'),
    )

    STAGE_CHOICES = (
        ('train', 'Train'),
        ('label', 'Label'),
        ('test', 'Test'),
        ('trial', 'Full trial'),
    )

    name = models.CharField(max_length=100)
    seed = models.BigIntegerField()
    stage = models.CharField(max_length=20, choices=STAGE_CHOICES, default='trial')
    config_hash = models.CharField(max_length=64)
    run_dir = models.CharField(max_length=500)
    grid_cell = models.CharField(max_length=255, blank=True, help_text="key=value pairs of the grid cell, if any")
    status = models.CharField(max_length=20, choices=STATUS_CHOICES, default='pending')
    examples_seen = models.PositiveIntegerField(default=0)
    recomputations = models.PositiveIntegerField(default=0)
    flagged_examples = models.PositiveIntegerField(default=0)
    error = models.TextField(blank=True)
    started_at = models.DateTimeField(auto_now_add=True)
    finished_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        ordering = ['-started_at']
        indexes = [
            models.Index(fields=['name'], name='experiments_name_3c1b2e_idx'),
            models.Index(fields=['config_hash'], name='experiments_config__9f2d4a_idx'),
            models.Index(fields=['status'], name='experiments_status_7e8a1c_idx'),
        ]

    def __str__(self):
        return f"{self.name} seed={self.seed} ({self.get_stage_display()}) - {self.get_status_display()}"

    def save(self, *args, **kwargs):
        if self.status in ('completed', 'failed') and not self.finished_at:
            from django.utils import timezone
            self.finished_at = timezone.now()
        super().save(*args, **kwargs)


class SchemeResult(models.Model):
    run = models.ForeignKey(ExperimentRun, on_delete=models.CASCADE, related_name='results')
    scheme = models.CharField(max_length=20)
    accuracy = models.FloatField()

    class Meta:
        ordering = ['run', 'scheme']
        unique_together = ('run', 'scheme')

    def __str__(self):
        return f"{self.run} {self.scheme}: {self.accuracy:.4f}"
