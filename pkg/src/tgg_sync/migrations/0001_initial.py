# Generated by Django 3.2.16 on 2022-11-14 09:21

import bitfield.models
from django.db import migrations, models
import django.db.models.deletion
import tgg_sync.validators


ANNOTATION_FLAGS = (('added', '+'), ('deleted', '-'), ('repropagated', '*'), ('damaged', '/'), ('changed', '#'), ('untouched', 'u'), ('nac_violated', 'n'))


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='Grammar',
            fields=[
                ('id', models.AutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('slug', models.SlugField(unique=True, verbose_name='Slug')),
                ('text', models.TextField(validators=[tgg_sync.validators.GrammarValidator()], verbose_name='Grammar')),
            ],
            options={
                'verbose_name': 'Grammar',
                'verbose_name_plural': 'Grammars',
            },
        ),
        migrations.CreateModel(
            name='SyncRun',
            fields=[
                ('id', models.AutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('orchestration', models.JSONField(blank=True, default=dict, validators=[tgg_sync.validators.OrchestrationValidator()], verbose_name='Orchestration')),
                ('report', models.JSONField(blank=True, default=dict, verbose_name='Report')),
                ('status', models.CharField(choices=[('consistent', 'Consistent'), ('unresolved', 'Unresolved conflicts'), ('inconsistent', 'Inconsistent')], default='consistent', max_length=16, verbose_name='Status')),
                ('created', models.DateTimeField(auto_now_add=True, verbose_name='Created')),
                ('grammar', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='runs', to='tgg_sync.grammar', verbose_name='Grammar')),
            ],
            options={
                'verbose_name': 'Synchronization Run',
                'verbose_name_plural': 'Synchronization Runs',
                'ordering': ('-created',),
            },
        ),
        migrations.CreateModel(
            name='NodeAnnotation',
            fields=[
                ('id', models.AutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('node', models.CharField(max_length=64, verbose_name='Node')),
                ('rule', models.CharField(max_length=64, verbose_name='Rule')),
                ('candidate', models.BooleanField(default=False, verbose_name='Candidate')),
                ('src', bitfield.models.BitField(ANNOTATION_FLAGS, default=0, verbose_name='Source annotation')),
                ('trg', bitfield.models.BitField(ANNOTATION_FLAGS, default=0, verbose_name='Target annotation')),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='annotations', to='tgg_sync.syncrun', verbose_name='Run')),
            ],
            options={
                'verbose_name': 'Node Annotation',
                'verbose_name_plural': 'Node Annotations',
            },
        ),
        migrations.CreateModel(
            name='ConflictRecord',
            fields=[
                ('id', models.AutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('conflict_id', models.CharField(max_length=16, verbose_name='Conflict')),
                ('kind', models.CharField(choices=[('preserve-delete', 'preserve-delete'), ('correspondence-preservation', 'correspondence-preservation'), ('attribute-change', 'attribute-change')], max_length=32, verbose_name='Kind')),
                ('anchor', models.CharField(max_length=64, verbose_name='Anchor')),
                ('scope', models.JSONField(default=list, verbose_name='Scope')),
                ('strategy', models.CharField(blank=True, choices=[('take-source', 'take-source'), ('take-target', 'take-target'), ('preserve', 'preserve')], max_length=16, verbose_name='Strategy')),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='conflicts', to='tgg_sync.syncrun', verbose_name='Run')),
            ],
            options={
                'verbose_name': 'Conflict',
                'verbose_name_plural': 'Conflicts',
            },
        ),
        migrations.AddConstraint(
            model_name='conflictrecord',
            constraint=models.UniqueConstraint(fields=('run', 'conflict_id'), name='unique_run_conflict'),
        ),
    ]
