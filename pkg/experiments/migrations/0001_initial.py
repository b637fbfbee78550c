# Generated by Django 5.0.1 on 2026-10-16 00:00

from django.db import migrations, models
import django.db.models.deletion


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='ExperimentRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('name', models.CharField(max_length=100)),
                ('seed', models.BigIntegerField()),
                ('stage', models.CharField(choices=[('train', 'Train'), ('label', 'Label'), ('test', 'Test'), ('trial', 'Full trial')], default='trial', max_length=20)),
                ('config_hash', models.CharField(max_length=64)),
                ('run_dir', models.CharField(max_length=500)),
                ('grid_cell', models.CharField(blank=True, help_text='key=value pairs of the grid cell, if any', max_length=255)),
                ('status', models.CharField(choices=[('pending', 'Pending'), ('running', 'Running'), ('completed', 'Completed'), ('failed', 'Failed')], default='pending', max_length=20)),
                ('examples_seen', models.PositiveIntegerField(default=0)),
                ('recomputations', models.PositiveIntegerField(default=0)),
                ('flagged_examples', models.PositiveIntegerField(default=0)),
                ('error', models.TextField(blank=True)),
                ('started_at', models.DateTimeField(auto_now_add=True)),
                ('finished_at', models.DateTimeField(blank=True, null=True)),
            ],
            options={
                'ordering': ['-started_at'],
                'indexes': [models.Index(fields=['name'], name='experiments_name_3c1b2e_idx'), models.Index(fields=['config_hash'], name='experiments_config__9f2d4a_idx'), models.Index(fields=['status'], name='experiments_status_7e8a1c_idx')],
            },
        ),
        migrations.CreateModel(
            name='SchemeResult',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('scheme', models.CharField(max_length=20)),
                ('accuracy', models.FloatField()),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='results', to='experiments.experimentrun')),
            ],
            options={
                'ordering': ['run', 'scheme'],
                'unique_together': {('run', 'scheme')},
            },
        ),
    ]
