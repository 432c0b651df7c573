# Generated by Django 4.2.7 on 2026-10-19 09:12

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='ComparisonRecord',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('study', models.CharField(help_text='Subcommand or study that produced the row', max_length=50)),
                ('config_digest', models.CharField(blank=True, help_text='SHA-256 of the normalized run configuration', max_length=64)),
                ('epsilon', models.FloatField()),
                ('order', models.PositiveIntegerField(help_text='Truncation order P')),
                ('t', models.FloatField(help_text='Slow time of the comparison')),
                ('l1', models.FloatField(blank=True, null=True)),
                ('l2', models.FloatField(blank=True, null=True)),
                ('linf', models.FloatField(blank=True, null=True)),
                ('runtime_s', models.FloatField(default=0.0)),
                ('steps', models.PositiveIntegerField(default=0)),
                ('error', models.TextField(blank=True)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at', 'epsilon', 'order', 't'],
                'indexes': [models.Index(fields=['study', 'config_digest'], name='analysis_study_digest_idx')],
            },
        ),
    ]
