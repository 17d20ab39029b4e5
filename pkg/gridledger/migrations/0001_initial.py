import django.db.models.deletion
from django.db import migrations, models

import gridledger.enums
import gridledger.fields


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name='ScenarioRun',
            fields=[
                ('id', models.AutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('seed', models.BigIntegerField()),
                ('config_digest', models.CharField(max_length=64)),
                ('chain_head', models.CharField(blank=True, max_length=64)),
                ('chain_valid', models.BooleanField(default=False)),
                ('violation', gridledger.fields.EnumField(
                    blank=True, enum=gridledger.enums.Violation, max_length=20, null=True)),
                ('report', models.JSONField(default=dict)),
                ('created', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ('-created',),
            },
        ),
        migrations.CreateModel(
            name='VerdictRecord',
            fields=[
                ('id', models.AutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('tick', models.PositiveIntegerField()),
                ('period', models.PositiveIntegerField()),
                ('verdict', gridledger.fields.EnumField(enum=gridledger.enums.Verdict, max_length=10)),
                ('reason', gridledger.fields.EnumField(
                    blank=True, enum=gridledger.enums.DropReason, max_length=20, null=True)),
                ('flag', gridledger.fields.EnumIntegerField(blank=True, enum=gridledger.enums.DlFlag, null=True)),
                ('origin', models.CharField(default='node', max_length=16)),
                ('run', models.ForeignKey(
                    on_delete=django.db.models.deletion.CASCADE, related_name='verdicts', to='gridledger.scenariorun')),
            ],
            options={
                'ordering': ('run', 'tick', 'id'),
            },
        ),
    ]
