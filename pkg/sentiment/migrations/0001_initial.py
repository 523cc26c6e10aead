from django.db import migrations, models
import django.db.models.deletion


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='PipelineRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('updated_at', models.DateTimeField(auto_now=True)),
                ('command', models.CharField(max_length=50)),
                ('config_digest', models.CharField(max_length=64)),
                ('seeds', models.JSONField(blank=True, default=dict)),
                ('input_digests', models.JSONField(blank=True, default=dict)),
                ('output_digests', models.JSONField(blank=True, default=dict)),
                ('manifest_path', models.CharField(blank=True, max_length=500)),
                ('status', models.CharField(choices=[('running', 'Running'), ('ok', 'Succeeded'), ('failed', 'Failed'), ('halted', 'Halted by guard')], default='running', max_length=10)),
                ('exit_code', models.IntegerField(default=0)),
            ],
            options={
                'ordering': ['-created_at', '-id'],
            },
        ),
        migrations.CreateModel(
            name='LabelingIteration',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('updated_at', models.DateTimeField(auto_now=True)),
                ('iteration', models.PositiveIntegerField()),
                ('batch_size', models.PositiveIntegerField()),
                ('pool_size', models.PositiveIntegerField()),
                ('abstain_count', models.PositiveIntegerField(default=0)),
                ('holdout_f1_before', models.FloatField(blank=True, null=True)),
                ('holdout_f1_after', models.FloatField(blank=True, null=True)),
                ('accepted', models.BooleanField(default=True)),
                ('record', models.JSONField(default=dict)),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='iterations', to='sentiment.pipelinerun')),
            ],
            options={
                'ordering': ['run', 'iteration'],
                'unique_together': {('run', 'iteration')},
            },
        ),
    ]
