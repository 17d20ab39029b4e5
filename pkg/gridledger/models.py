from django.db import models, transaction

from .enums import DlFlag, DropReason, Verdict, Violation
from .fields import EnumField, EnumIntegerField


class ScenarioRunQuerySet(models.QuerySet):
    @transaction.atomic
    def record(self, result, config_digest):
        """Store a finished run and the verdict of every delivered DL message."""
        report = result.report
        run = self.create(
            seed=report['seed'],
            config_digest=config_digest,
            chain_head=report['chain']['head'],
            chain_valid=report['chain']['valid'],
            violation=report['chain']['violation'],
            report=report,
        )
        VerdictRecord.objects.bulk_create([
            VerdictRecord(
                run=run,
                tick=entry.tick,
                period=entry.period_id,
                verdict=entry.verdict,
                reason=entry.reason,
                flag=entry.flag,
                origin=entry.origin,
            )
            for entry in result.verdicts
        ])
        return run


class ScenarioRun(models.Model):
    seed = models.BigIntegerField()
    config_digest = models.CharField(max_length=64)
    chain_head = models.CharField(max_length=64, blank=True)
    chain_valid = models.BooleanField(default=False)
    violation = EnumField(Violation, max_length=20, blank=True, null=True)
    report = models.JSONField(default=dict)
    created = models.DateTimeField(auto_now_add=True)

    objects = ScenarioRunQuerySet.as_manager()

    class Meta:
        ordering = ('-created',)

    def __str__(self):
        return 'run {} (seed {})'.format(self.pk, self.seed)


class VerdictRecord(models.Model):
    run = models.ForeignKey(ScenarioRun, related_name='verdicts', on_delete=models.CASCADE)
    tick = models.PositiveIntegerField()
    period = models.PositiveIntegerField()
    verdict = EnumField(Verdict, max_length=10)
    reason = EnumField(DropReason, max_length=20, blank=True, null=True)
    flag = EnumIntegerField(DlFlag, blank=True, null=True)
    origin = models.CharField(max_length=16, default='node')

    class Meta:
        ordering = ('run', 'tick', 'id')

    def __str__(self):
        return '{} at tick {}'.format(self.verdict, self.tick)
